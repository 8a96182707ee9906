#pragma once

#include "lab/gaussian.hpp"
#include "lab/matrix.hpp"
#include "lab/r1pca.hpp"
#include "lab/rng.hpp"

namespace lab {

// Zero-mean Gaussian with possibly rank-deficient covariance. rank counts
// eigenvalues above 1e-10.
struct GaussianDist {
    int dim = 0;
    Matrix cov;
    int rank = 0;
    EigenDecomposition eig;

    static GaussianDist from_cov(const Matrix& cov);
};

struct CouplingCost {
    enum class Method { projection, exact_assignment };
    double cost = 0.0;
    Method method = Method::projection;
    double std_err = 0.0;
};

// KL(p || q) for zero-mean Gaussians; +infinity when p's support is not
// contained in q's or p is singular relative to q.
double gaussian_kl(const GaussianDist& p, const GaussianDist& q);

struct JsdEstimate {
    double value = 0.0;    // clipped to [0, log 2]
    double std_err = 0.0;
    double raw = 0.0;      // unclipped Monte-Carlo value
    bool analytic = false; // true when the mismatched-support rule fired
};

// Exactly log 2 when ranks differ or the covariance column spans differ
// (principal angle above 1e-8); otherwise a Monte-Carlo estimate on the
// common support.
JsdEstimate jsd_gaussian(const GaussianDist& p, const GaussianDist& q, long n_mc, RngStream rng);

// p / (p + q)
double optimal_discriminator(double p_density, double q_density);

// E||Y - U U^T Y||: the W1 upper bound achieved by the projection coupling.
// Identical estimator to residual_objective, same stream -> same bits.
CouplingCost projection_coupling_cost(const CovarianceModel& cov, const SubspaceBasis& basis,
                                      long n_mc, RngStream rng);

// Exact W1 between equal-size empirical measures via optimal assignment on
// the Euclidean cost matrix. Capped at n <= 1024.
CouplingCost empirical_w1_exact(const SampleSet& a, const SampleSet& b);

// Minimum-cost perfect matching on a square cost matrix; returns the column
// assigned to each row.
std::vector<int> solve_assignment(const Matrix& cost);

}  // namespace lab
