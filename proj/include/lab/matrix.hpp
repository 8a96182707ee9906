#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "lab/errors.hpp"

namespace lab {

// Dense real matrix, row-major storage. Vectors are n x 1 columns.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols);  // zero-filled
    Matrix(int rows, int cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(int n);
    static Matrix diag(const std::vector<double>& entries);
    static Matrix col_vector(const std::vector<double>& entries);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    Matrix transposed() const;
    Matrix col(int j) const;              // j-th column as a rows x 1 matrix
    void set_col(int j, const Matrix& v);

    Matrix& operator+=(const Matrix& rhs);
    Matrix& operator-=(const Matrix& rhs);
    Matrix& operator*=(double s);

    bool all_finite() const;
    double max_abs() const;

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix lhs, const Matrix& rhs);
Matrix operator*(Matrix lhs, double s);
Matrix operator*(double s, Matrix rhs);
Matrix operator*(const Matrix& lhs, const Matrix& rhs);  // matrix product

// C = A * B on raw row-major buffers; the one multiply kernel everything shares.
void matmul_kernel(const double* a, int m, int k, const double* b, int n, double* c);

double frobenius_norm(const Matrix& a);
double frobenius_distance(const Matrix& a, const Matrix& b);

// max |a_ij - a_ji|
double asymmetry(const Matrix& a);
Matrix symmetrized(const Matrix& a);

struct EigenDecomposition {
    std::vector<double> eigenvalues;  // sorted descending
    Matrix eigenvectors;              // unit-norm columns, matching order
};

// Cyclic Jacobi eigensolver for symmetric matrices. Eigenvalues sorted
// descending (ties keep original index order); each eigenvector's first
// component with magnitude > 1e-12 is made positive.
EigenDecomposition sym_eig(const Matrix& a);

// Lower-triangular L with L*L^T = a for symmetric PSD a. Eigenvalues in
// [-1e-8, 0) are treated as zero; below -1e-8 is a DomainError.
Matrix cholesky_factor(const Matrix& a);

}  // namespace lab
