#include "lab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace lab {

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw DimensionError("matrix dimensions must be nonnegative");
    data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 0 || cols < 0) throw DimensionError("matrix dimensions must be nonnegative");
    if (data_.size() != static_cast<std::size_t>(rows) * cols)
        throw DimensionError("matrix data length does not match rows*cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) throw DimensionError("ragged initializer rows");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diag(const std::vector<double>& entries) {
    Matrix m(static_cast<int>(entries.size()), static_cast<int>(entries.size()));
    for (int i = 0; i < m.rows(); ++i) m(i, i) = entries[i];
    return m;
}

Matrix Matrix::col_vector(const std::vector<double>& entries) {
    return Matrix(static_cast<int>(entries.size()), 1, entries);
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::col(int j) const {
    if (j < 0 || j >= cols_) throw DimensionError("column index out of range");
    Matrix v(rows_, 1);
    for (int i = 0; i < rows_; ++i) v(i, 0) = (*this)(i, j);
    return v;
}

void Matrix::set_col(int j, const Matrix& v) {
    if (j < 0 || j >= cols_ || v.rows() != rows_ || v.cols() != 1)
        throw DimensionError("set_col shape mismatch");
    for (int i = 0; i < rows_; ++i) (*this)(i, j) = v(i, 0);
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
    if (!same_shape(rhs)) throw DimensionError("matrix addition shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& rhs) {
    if (!same_shape(rhs)) throw DimensionError("matrix subtraction shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::fabs(x));
    return m;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator*(Matrix lhs, double s) { return lhs *= s; }
Matrix operator*(double s, Matrix rhs) { return rhs *= s; }

void matmul_kernel(const double* a, int m, int k, const double* b, int n, double* c) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = arow[p];
            if (aip == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols() != rhs.rows()) throw DimensionError("matrix product shape mismatch");
    Matrix c(lhs.rows(), rhs.cols());
    matmul_kernel(lhs.data(), lhs.rows(), lhs.cols(), rhs.data(), rhs.cols(), c.data());
    return c;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.values()) s += x * x;
    return std::sqrt(s);
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("frobenius_distance shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double asymmetry(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("asymmetry needs a square matrix");
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j) m = std::max(m, std::fabs(a(i, j) - a(j, i)));
    return m;
}

Matrix symmetrized(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("symmetrized needs a square matrix");
    Matrix s(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        s(i, i) = a(i, i);
        for (int j = i + 1; j < a.cols(); ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

namespace {

// One cyclic sweep of Jacobi rotations over the upper triangle.
void jacobi_sweep(Matrix& a, Matrix& v) {
    const int n = a.rows();
    for (int p = 0; p < n - 1; ++p) {
        for (int q = p + 1; q < n; ++q) {
            const double apq = a(p, q);
            if (apq == 0.0) continue;
            const double app = a(p, p);
            const double aqq = a(q, q);
            const double theta = 0.5 * (aqq - app) / apq;
            // smaller-root tangent keeps the rotation angle <= pi/4
            double t;
            if (std::fabs(theta) > 1e150) {
                t = 0.5 / theta;
            } else {
                t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
            }
            const double c = 1.0 / std::sqrt(t * t + 1.0);
            const double s = t * c;
            const double tau = s / (1.0 + c);

            a(p, p) = app - t * apq;
            a(q, q) = aqq + t * apq;
            a(p, q) = 0.0;
            a(q, p) = 0.0;
            for (int i = 0; i < n; ++i) {
                if (i == p || i == q) continue;
                const double aip = a(i, p);
                const double aiq = a(i, q);
                a(i, p) = aip - s * (aiq + tau * aip);
                a(i, q) = aiq + s * (aip - tau * aiq);
                a(p, i) = a(i, p);
                a(q, i) = a(i, q);
            }
            for (int i = 0; i < n; ++i) {
                const double vip = v(i, p);
                const double viq = v(i, q);
                v(i, p) = vip - s * (viq + tau * vip);
                v(i, q) = viq + s * (vip - tau * viq);
            }
        }
    }
}

double off_diag_norm(const Matrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace

EigenDecomposition sym_eig(const Matrix& input) {
    if (input.rows() != input.cols()) throw DimensionError("sym_eig needs a square matrix");
    if (!input.all_finite()) throw DomainError("sym_eig: non-finite input");
    const int n = input.rows();
    Matrix a = symmetrized(input);
    Matrix v = Matrix::identity(n);

    const double scale = std::max(1.0, frobenius_norm(a));
    const double tol = 1e-15 * scale;
    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_diag_norm(a) <= tol) break;
        jacobi_sweep(a, v);
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) > a(j, j); });

    EigenDecomposition eig;
    eig.eigenvalues.resize(n);
    eig.eigenvectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
        const int src = order[k];
        eig.eigenvalues[k] = a(src, src);
        double sign = 1.0;
        for (int i = 0; i < n; ++i) {
            if (std::fabs(v(i, src)) > 1e-12) {
                sign = v(i, src) > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (int i = 0; i < n; ++i) eig.eigenvectors(i, k) = sign * v(i, src);
    }
    return eig;
}

namespace {

// Semidefinite Cholesky: zero pivots give zero columns.
Matrix psd_cholesky(const Matrix& a) {
    const int n = a.rows();
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::fabs(a(i, i)));
    const double pivot_tol = 1e-12 * std::max(1.0, max_diag);

    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d <= pivot_tol) {
            l(j, j) = 0.0;
            continue;
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

}  // namespace

Matrix cholesky_factor(const Matrix& input) {
    if (input.rows() != input.cols()) throw DimensionError("cholesky_factor needs a square matrix");
    if (!input.all_finite()) throw DomainError("cholesky_factor: non-finite input");
    Matrix a = symmetrized(input);

    EigenDecomposition eig = sym_eig(a);
    const double min_eig = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.back();
    if (min_eig < -1e-8) throw DomainError("cholesky_factor: matrix is indefinite");

    if (min_eig < 0.0) {
        // clamp tiny negative eigenvalues to zero and factor the projection
        std::vector<double> clamped(eig.eigenvalues);
        for (double& x : clamped) x = std::max(x, 0.0);
        const Matrix& v = eig.eigenvectors;
        a = v * Matrix::diag(clamped) * v.transposed();
        a = symmetrized(a);
    }
    return psd_cholesky(a);
}

}  // namespace lab
