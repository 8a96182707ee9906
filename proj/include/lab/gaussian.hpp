#pragma once

#include <cstdint>
#include <string>

#include "lab/matrix.hpp"
#include "lab/rng.hpp"

namespace lab {

// Ground-truth covariance with its eigendecomposition. Only
// generate_covariance guarantees unit Frobenius norm; from_matrix wraps any
// symmetric PSD matrix as-is (used for empirical covariances).
struct CovarianceModel {
    int d = 0;
    Matrix k_y;
    EigenDecomposition eig;

    static CovarianceModel from_matrix(const Matrix& k);
};

struct SampleSet {
    long n = 0;
    int dim = 0;
    Matrix samples;  // n x dim, one sample per row
    std::uint64_t seed = 0;
};

// A * diag(s^2) * A^T with A_ij ~ N(0,1) and s_i^2 ~ Uniform(0,10),
// normalized to unit Frobenius norm.
CovarianceModel generate_covariance(int d, RngStream rng);

// Rows are L*z with L = cholesky_factor(K_Y), z standard normal, consumed in
// row-major per-sample order.
SampleSet sample_gaussian(const CovarianceModel& cov, long n, RngStream rng);

SampleSet sample_latent(int r, long n, RngStream rng);

// (1/n) * sum y_i y_i^T; the model is zero-mean, no mean subtraction.
Matrix empirical_covariance(const SampleSet& s);

// CSV with header `dim=<d>,n=<n>,seed=<seed>`, one row per sample.
std::string samples_to_csv(const SampleSet& s);
SampleSet samples_from_csv(const std::string& text);
void write_samples_csv(const SampleSet& s, const std::string& path);
SampleSet read_samples_csv(const std::string& path);

}  // namespace lab
