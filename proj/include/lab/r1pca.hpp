#pragma once

#include <span>
#include <string>
#include <vector>

#include "lab/gaussian.hpp"
#include "lab/matrix.hpp"
#include "lab/rng.hpp"

namespace lab {

struct SubspaceBasis {
    Matrix u;  // d x r, ||U^T U - I||_F <= 1e-8
    int d() const { return u.rows(); }
    int r() const { return u.cols(); }
};

struct ProjectionDecomposition {
    std::vector<double> y_s;      // projection onto span(U)
    std::vector<double> y_sperp;  // residual
};

// Monte-Carlo estimate of E[Y Y^T / ||Y - U U^T Y||] plus the diagnostics
// used to check its spectral structure against the true eigenbasis.
struct KeyConditionReport {
    Matrix m_hat;             // symmetrized entrywise MC mean
    EigenDecomposition m_eigs;
    double cross_term_max = 0.0;  // max |off-diagonal| of V^T m_hat V
    bool ordering_ok = false;     // top-r diagonal of V^T m_hat V dominates the rest
    double std_err = 0.0;         // largest entrywise standard error
};

struct McEstimate {
    double estimate = 0.0;
    double std_err = 0.0;
};

// Columns orthonormalized by modified Gram-Schmidt.
SubspaceBasis orthonormalized(const Matrix& m);

// ||U1 U1^T - U2 U2^T||_F, the rotation-invariant subspace distance.
double projector_distance(const SubspaceBasis& a, const SubspaceBasis& b);

ProjectionDecomposition project_decompose(std::span<const double> y, const SubspaceBasis& basis);

// Monte-Carlo mean of ||Y - U U^T Y|| over n_mc fresh draws from N(0, K_Y).
McEstimate residual_objective(const CovarianceModel& cov, const SubspaceBasis& basis, long n_mc,
                              RngStream rng);

// Requires d - r >= 2: with one residual dimension the integrand's
// expectation does not exist.
KeyConditionReport estimate_m_matrix(const CovarianceModel& cov, const SubspaceBasis& basis,
                                     long n_mc, RngStream rng);

// Fixed-point iteration on the principal eigenvectors of the estimated M,
// started from the top-r eigenvectors of K_Y rotated by 0.2 rad in a random
// plane. Throws ConvergenceError when max_iter passes without the projector
// distance between consecutive iterates dropping below tol.
SubspaceBasis solve_key_condition(const CovarianceModel& cov, int r, long n_mc, int max_iter,
                                  double tol, RngStream rng);

// U U^T K_Y U U^T, the generated covariance induced by the subspace.
Matrix generator_from_subspace(const CovarianceModel& cov, const SubspaceBasis& basis);

std::string key_condition_report_to_json(const KeyConditionReport& report);

}  // namespace lab
