#include "lab/pca.hpp"

#include <cmath>

namespace lab {

PcaSolution population_pca(const CovarianceModel& cov, int r) {
    const int d = cov.d;
    if (r < 1 || r > d) throw DomainError("pca rank out of range");

    PcaSolution sol;
    sol.r = r;
    sol.basis = Matrix(d, r);
    for (int k = 0; k < r; ++k) {
        const double sigma = std::sqrt(std::max(cov.eig.eigenvalues[k], 0.0));
        for (int i = 0; i < d; ++i) sol.basis(i, k) = sigma * cov.eig.eigenvectors(i, k);
    }
    if (r == d) {
        // V diag(sigma^2) V^T is K itself at full rank
        sol.generator_gram = cov.k_y;
        sol.residual = 0.0;
    } else {
        sol.generator_gram = symmetrized(sol.basis * sol.basis.transposed());
        sol.residual = frobenius_distance(cov.k_y, sol.generator_gram);
    }
    sol.rank_tie =
        r < d && std::fabs(cov.eig.eigenvalues[r - 1] - cov.eig.eigenvalues[r]) < 1e-8;
    return sol;
}

PcaSolution empirical_pca(const SampleSet& samples, int r) {
    if (r < 1 || r > samples.dim) throw DomainError("pca rank out of range");
    return population_pca(CovarianceModel::from_matrix(empirical_covariance(samples)), r);
}

}  // namespace lab
