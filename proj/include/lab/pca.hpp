#pragma once

#include "lab/gaussian.hpp"
#include "lab/matrix.hpp"

namespace lab {

struct PcaSolution {
    int r = 0;
    Matrix generator_gram;  // d x d, rank <= r
    Matrix basis;           // d x r, column i = sigma_i * v_i
    double residual = 0.0;  // ||K - generator_gram||_F
    bool rank_tie = false;  // |sigma_r^2 - sigma_{r+1}^2| < 1e-8
};

// Rank-r covariance from the top-r eigenpairs of the population covariance.
PcaSolution population_pca(const CovarianceModel& cov, int r);

// population_pca applied to the (un-renormalized) empirical covariance.
PcaSolution empirical_pca(const SampleSet& samples, int r);

}  // namespace lab
