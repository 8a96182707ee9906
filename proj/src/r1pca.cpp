#include "lab/r1pca.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "lab/errors.hpp"

namespace lab {

SubspaceBasis orthonormalized(const Matrix& m) {
    const int d = m.rows();
    const int r = m.cols();
    Matrix u = m;
    for (int j = 0; j < r; ++j) {
        for (int k = 0; k < j; ++k) {
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += u(i, k) * u(i, j);
            for (int i = 0; i < d; ++i) u(i, j) -= dot * u(i, k);
        }
        double norm = 0.0;
        for (int i = 0; i < d; ++i) norm += u(i, j) * u(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw DomainError("orthonormalized: rank-deficient basis");
        for (int i = 0; i < d; ++i) u(i, j) /= norm;
    }
    return SubspaceBasis{u};
}

double projector_distance(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.d() != b.d() || a.r() != b.r()) throw DimensionError("projector_distance: shape mismatch");
    // ||P_a - P_b||_F^2 = 2r - 2 ||U_a^T U_b||_F^2
    const Matrix c = a.u.transposed() * b.u;
    double s = 0.0;
    for (double x : c.values()) s += x * x;
    return std::sqrt(std::max(0.0, 2.0 * a.r() - 2.0 * s));
}

namespace {

void require_orthonormal(const SubspaceBasis& basis) {
    const Matrix gram = basis.u.transposed() * basis.u;
    const double dev = frobenius_distance(gram, Matrix::identity(basis.r()));
    if (dev > 1e-8) throw DomainError("subspace basis is not orthonormal");
}

// y_s = U (U^T y) into preallocated buffers
void project(const Matrix& u, const double* y, double* coeffs, double* y_s) {
    const int d = u.rows();
    const int r = u.cols();
    for (int k = 0; k < r; ++k) {
        double acc = 0.0;
        for (int i = 0; i < d; ++i) acc += u(i, k) * y[i];
        coeffs[k] = acc;
    }
    for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int k = 0; k < r; ++k) acc += u(i, k) * coeffs[k];
        y_s[i] = acc;
    }
}

}  // namespace

ProjectionDecomposition project_decompose(std::span<const double> y, const SubspaceBasis& basis) {
    if (static_cast<int>(y.size()) != basis.d())
        throw DimensionError("project_decompose: vector dimension mismatch");
    require_orthonormal(basis);
    const int d = basis.d();
    ProjectionDecomposition out;
    out.y_s.resize(d);
    out.y_sperp.resize(d);
    std::vector<double> coeffs(basis.r());
    project(basis.u, y.data(), coeffs.data(), out.y_s.data());
    for (int i = 0; i < d; ++i) out.y_sperp[i] = y[i] - out.y_s[i];
    return out;
}

McEstimate residual_objective(const CovarianceModel& cov, const SubspaceBasis& basis, long n_mc,
                              RngStream rng) {
    if (basis.d() != cov.d) throw DimensionError("residual_objective: basis dimension mismatch");
    if (n_mc < 100) throw DomainError("residual_objective: n_mc must be >= 100");
    require_orthonormal(basis);

    const int d = cov.d;
    const int r = basis.r();
    const Matrix l = cholesky_factor(cov.k_y);
    std::vector<double> z(d), y(d), coeffs(r), y_s(d);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (long t = 0; t < n_mc; ++t) {
        for (int j = 0; j < d; ++j) z[j] = rng.normal();
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int k = 0; k <= i; ++k) acc += l(i, k) * z[k];
            y[i] = acc;
        }
        project(basis.u, y.data(), coeffs.data(), y_s.data());
        double res_sq = 0.0;
        for (int i = 0; i < d; ++i) {
            const double diff = y[i] - y_s[i];
            res_sq += diff * diff;
        }
        const double res = std::sqrt(res_sq);
        sum += res;
        sum_sq += res * res;
    }
    const double n = static_cast<double>(n_mc);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq / n - mean * mean) * n / (n - 1.0));
    return McEstimate{mean, std::sqrt(var / n)};
}

KeyConditionReport estimate_m_matrix(const CovarianceModel& cov, const SubspaceBasis& basis,
                                     long n_mc, RngStream rng) {
    const int d = cov.d;
    const int r = basis.r();
    if (basis.d() != d) throw DimensionError("estimate_m_matrix: basis dimension mismatch");
    if (d - r < 2)
        throw UnsupportedError(
            "estimate_m_matrix requires d - r >= 2; the integrand has no finite expectation "
            "with a one-dimensional residual");
    if (n_mc < 1000) throw DomainError("estimate_m_matrix: n_mc must be >= 1000");
    require_orthonormal(basis);

    const Matrix l = cholesky_factor(cov.k_y);
    std::vector<double> z(d), y(d), coeffs(r), y_s(d);
    const int n_upper = d * (d + 1) / 2;
    std::vector<double> sum(n_upper, 0.0), sum_sq(n_upper, 0.0);

    for (long t = 0; t < n_mc; ++t) {
        for (int j = 0; j < d; ++j) z[j] = rng.normal();
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int k = 0; k <= i; ++k) acc += l(i, k) * z[k];
            y[i] = acc;
        }
        project(basis.u, y.data(), coeffs.data(), y_s.data());
        double res_sq = 0.0;
        for (int i = 0; i < d; ++i) {
            const double diff = y[i] - y_s[i];
            res_sq += diff * diff;
        }
        const double w = 1.0 / std::sqrt(res_sq);
        int idx = 0;
        for (int i = 0; i < d; ++i) {
            const double yiw = y[i] * w;
            for (int j = i; j < d; ++j, ++idx) {
                const double v = yiw * y[j];
                sum[idx] += v;
                sum_sq[idx] += v * v;
            }
        }
    }

    KeyConditionReport rep;
    rep.m_hat = Matrix(d, d);
    const double n = static_cast<double>(n_mc);
    double max_se = 0.0;
    int idx = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j, ++idx) {
            const double mean = sum[idx] / n;
            const double var = std::max(0.0, (sum_sq[idx] / n - mean * mean) * n / (n - 1.0));
            max_se = std::max(max_se, std::sqrt(var / n));
            rep.m_hat(i, j) = mean;
            rep.m_hat(j, i) = mean;
        }
    }
    rep.std_err = max_se;
    rep.m_eigs = sym_eig(rep.m_hat);

    // diagnostics in the true eigenbasis of K_Y
    const Matrix& v = cov.eig.eigenvectors;
    const Matrix rotated = v.transposed() * rep.m_hat * v;
    double cross = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) cross = std::max(cross, std::fabs(rotated(i, j)));
    rep.cross_term_max = cross;

    double min_top = std::numeric_limits<double>::infinity();
    double max_rest = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
        if (j < r)
            min_top = std::min(min_top, rotated(j, j));
        else
            max_rest = std::max(max_rest, rotated(j, j));
    }
    rep.ordering_ok = min_top >= max_rest;
    return rep;
}

namespace {

// Rotation by `angle` in the plane spanned by two random orthonormal vectors.
Matrix random_plane_rotation(int d, double angle, RngStream& rng) {
    std::vector<double> a(d), b(d);
    for (int i = 0; i < d; ++i) a[i] = rng.normal();
    double na = 0.0;
    for (double x : a) na += x * x;
    na = std::sqrt(na);
    for (double& x : a) x /= na;

    double dot = 0.0;
    for (int i = 0; i < d; ++i) b[i] = rng.normal();
    for (int i = 0; i < d; ++i) dot += a[i] * b[i];
    for (int i = 0; i < d; ++i) b[i] -= dot * a[i];
    double nb = 0.0;
    for (double x : b) nb += x * x;
    nb = std::sqrt(nb);
    for (double& x : b) x /= nb;

    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Matrix q = Matrix::identity(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            q(i, j) += (c - 1.0) * (a[i] * a[j] + b[i] * b[j]) + s * (b[i] * a[j] - a[i] * b[j]);
    return q;
}

}  // namespace

SubspaceBasis solve_key_condition(const CovarianceModel& cov, int r, long n_mc, int max_iter,
                                  double tol, RngStream rng) {
    const int d = cov.d;
    if (r < 1 || r > d) throw DomainError("solve_key_condition: rank out of range");
    if (d - r < 2) throw UnsupportedError("solve_key_condition requires d - r >= 2");
    if (tol <= 0.0) throw DomainError("solve_key_condition: tol must be > 0");

    Matrix v_r(d, r);
    for (int k = 0; k < r; ++k)
        for (int i = 0; i < d; ++i) v_r(i, k) = cov.eig.eigenvectors(i, k);

    RngStream init_rng = rng.substream(0);
    const Matrix q = random_plane_rotation(d, 0.2, init_rng);
    SubspaceBasis u = orthonormalized(q * v_r);

    double dist = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        const KeyConditionReport rep = estimate_m_matrix(cov, u, n_mc, rng.substream(iter + 1));
        Matrix top(d, r);
        for (int k = 0; k < r; ++k)
            for (int i = 0; i < d; ++i) top(i, k) = rep.m_eigs.eigenvectors(i, k);
        SubspaceBasis next = orthonormalized(top);
        dist = projector_distance(next, u);
        u = std::move(next);
        if (dist < tol) return u;
    }
    throw ConvergenceError("solve_key_condition: no convergence after max_iter", dist);
}

Matrix generator_from_subspace(const CovarianceModel& cov, const SubspaceBasis& basis) {
    if (basis.d() != cov.d) throw DimensionError("generator_from_subspace: dimension mismatch");
    require_orthonormal(basis);
    // U (U^T K U) U^T
    const Matrix ut_k = basis.u.transposed() * cov.k_y;
    const Matrix core = ut_k * basis.u;  // r x r
    return symmetrized(basis.u * core * basis.u.transposed());
}

std::string key_condition_report_to_json(const KeyConditionReport& report) {
    nlohmann::json j;
    auto matrix_rows = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    j["m_hat"] = matrix_rows(report.m_hat);
    j["m_eigs"] = {{"eigenvalues", report.m_eigs.eigenvalues},
                   {"eigenvectors", matrix_rows(report.m_eigs.eigenvectors)}};
    j["cross_term_max"] = report.cross_term_max;
    j["ordering_ok"] = report.ordering_ok;
    j["std_err"] = report.std_err;
    return j.dump(2);
}

}  // namespace lab
