#include "lab/divergences.hpp"

#include <cmath>
#include <limits>

#include "lab/errors.hpp"

namespace lab {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kSpanAngleTol = 1e-8;
constexpr double kLog2 = 0.6931471805599453;
const double kInf = std::numeric_limits<double>::infinity();

// Range basis of a distribution: eigenvector columns with eigenvalue > tol.
Matrix range_basis(const GaussianDist& g) {
    Matrix b(g.dim, g.rank);
    for (int k = 0; k < g.rank; ++k)
        for (int i = 0; i < g.dim; ++i) b(i, k) = g.eig.eigenvectors(i, k);
    return b;
}

// max_j sin(angle between column j of `vecs` and span(basis))
double max_residual_sine(const Matrix& vecs, const Matrix& basis) {
    double worst = 0.0;
    const int d = vecs.rows();
    for (int j = 0; j < vecs.cols(); ++j) {
        std::vector<double> col(d), proj(d, 0.0);
        for (int i = 0; i < d; ++i) col[i] = vecs(i, j);
        for (int k = 0; k < basis.cols(); ++k) {
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += basis(i, k) * col[i];
            for (int i = 0; i < d; ++i) proj[i] += dot * basis(i, k);
        }
        double res = 0.0;
        for (int i = 0; i < d; ++i) {
            const double r = col[i] - proj[i];
            res += r * r;
        }
        worst = std::max(worst, std::sqrt(res));
    }
    return worst;
}

bool support_contained(const GaussianDist& p, const GaussianDist& q) {
    if (p.rank > q.rank) return false;
    if (q.rank == q.dim) return true;
    return max_residual_sine(range_basis(p), range_basis(q)) <= kSpanAngleTol;
}

bool same_span(const GaussianDist& p, const GaussianDist& q) {
    if (p.rank != q.rank) return false;
    if (p.rank == p.dim) return true;
    return max_residual_sine(range_basis(p), range_basis(q)) <= kSpanAngleTol;
}

// Log density machinery on a reduced k-dimensional space.
struct LogDensity {
    Matrix inv;       // K^-1
    double log_norm;  // -1/2 (k log 2pi + logdet K)
    double operator()(const std::vector<double>& x) const {
        const int k = inv.rows();
        double quad = 0.0;
        for (int i = 0; i < k; ++i) {
            double acc = 0.0;
            for (int j = 0; j < k; ++j) acc += inv(i, j) * x[j];
            quad += x[i] * acc;
        }
        return -0.5 * quad + log_norm;
    }
};

bool make_log_density(const Matrix& k_mat, LogDensity& out) {
    const EigenDecomposition eig = sym_eig(k_mat);
    const int k = k_mat.rows();
    double logdet = 0.0;
    for (double lambda : eig.eigenvalues) {
        if (lambda <= kRankTol) return false;
        logdet += std::log(lambda);
    }
    std::vector<double> inv_l(eig.eigenvalues);
    for (double& x : inv_l) x = 1.0 / x;
    out.inv = symmetrized(eig.eigenvectors * Matrix::diag(inv_l) * eig.eigenvectors.transposed());
    out.log_norm = -0.5 * (k * std::log(2.0 * M_PI) + logdet);
    return true;
}

double log_add_exp(double a, double b) {
    const double m = std::max(a, b);
    if (m == -kInf) return -kInf;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

GaussianDist GaussianDist::from_cov(const Matrix& cov) {
    if (cov.rows() != cov.cols()) throw DimensionError("GaussianDist: covariance must be square");
    if (!cov.all_finite()) throw DomainError("GaussianDist: covariance must be finite");
    GaussianDist g;
    g.dim = cov.rows();
    g.cov = symmetrized(cov);
    g.eig = sym_eig(g.cov);
    if (!g.eig.eigenvalues.empty() && g.eig.eigenvalues.back() < -1e-8)
        throw DomainError("GaussianDist: covariance must be positive semidefinite");
    g.rank = 0;
    for (double lambda : g.eig.eigenvalues)
        if (lambda > kRankTol) ++g.rank;
    return g;
}

double gaussian_kl(const GaussianDist& p, const GaussianDist& q) {
    if (p.dim != q.dim) throw DimensionError("gaussian_kl: dimension mismatch");
    if (!support_contained(p, q)) return kInf;

    // work in q's range coordinates
    const Matrix b = range_basis(q);
    const int k = q.rank;
    const Matrix kp = symmetrized(b.transposed() * p.cov * b);
    double trace_term = 0.0;
    double logdet_q = 0.0;
    for (int i = 0; i < k; ++i) {
        const double lq = q.eig.eigenvalues[i];
        trace_term += kp(i, i) / lq;
        logdet_q += std::log(lq);
    }
    const EigenDecomposition ep = sym_eig(kp);
    double logdet_p = 0.0;
    for (double lambda : ep.eigenvalues) {
        if (lambda <= kRankTol) return kInf;  // p singular inside q's support
        logdet_p += std::log(lambda);
    }
    return 0.5 * (trace_term - k + logdet_q - logdet_p);
}

JsdEstimate jsd_gaussian(const GaussianDist& p, const GaussianDist& q, long n_mc, RngStream rng) {
    if (p.dim != q.dim) throw DimensionError("jsd_gaussian: dimension mismatch");
    if (!same_span(p, q)) {
        // mismatched supports saturate the divergence, no sampling involved
        return JsdEstimate{kLog2, 0.0, kLog2, true};
    }
    if (n_mc < 100) throw DomainError("jsd_gaussian: n_mc must be >= 100");

    const Matrix b = range_basis(p);
    const int k = p.rank;
    const Matrix kp = symmetrized(b.transposed() * p.cov * b);
    const Matrix kq = symmetrized(b.transposed() * q.cov * b);
    LogDensity log_p, log_q;
    if (!make_log_density(kp, log_p) || !make_log_density(kq, log_q))
        throw DomainError("jsd_gaussian: degenerate covariance on the common support");

    const Matrix lp = cholesky_factor(kp);
    const Matrix lq = cholesky_factor(kq);

    auto half_term = [&](const Matrix& l, bool own_is_p, RngStream stream) {
        std::vector<double> z(k), x(k);
        double sum = 0.0, sum_sq = 0.0;
        for (long t = 0; t < n_mc; ++t) {
            for (int i = 0; i < k; ++i) z[i] = stream.normal();
            for (int i = 0; i < k; ++i) {
                double acc = 0.0;
                for (int j = 0; j <= i; ++j) acc += l(i, j) * z[j];
                x[i] = acc;
            }
            const double a = log_p(x);
            const double c = log_q(x);
            const double lm = log_add_exp(a, c) - kLog2;
            const double term = (own_is_p ? a : c) - lm;
            sum += term;
            sum_sq += term * term;
        }
        const double n = static_cast<double>(n_mc);
        const double mean = sum / n;
        const double var = std::max(0.0, (sum_sq / n - mean * mean) * n / (n - 1.0));
        return std::pair<double, double>(mean, var / n);
    };

    const auto [mean_p, varm_p] = half_term(lp, true, rng.substream(1));
    const auto [mean_q, varm_q] = half_term(lq, false, rng.substream(2));

    JsdEstimate est;
    est.raw = 0.5 * (mean_p + mean_q);
    est.std_err = 0.5 * std::sqrt(varm_p + varm_q);
    est.value = std::min(std::max(est.raw, 0.0), kLog2);
    est.analytic = false;
    return est;
}

double optimal_discriminator(double p_density, double q_density) {
    if (p_density < 0.0 || q_density < 0.0)
        throw DomainError("optimal_discriminator: densities must be nonnegative");
    if (p_density == 0.0 && q_density == 0.0)
        throw DomainError("optimal_discriminator: both densities are zero");
    return p_density / (p_density + q_density);
}

CouplingCost projection_coupling_cost(const CovarianceModel& cov, const SubspaceBasis& basis,
                                      long n_mc, RngStream rng) {
    const McEstimate est = residual_objective(cov, basis, n_mc, rng);
    return CouplingCost{est.estimate, CouplingCost::Method::projection, est.std_err};
}

std::vector<int> solve_assignment(const Matrix& cost) {
    const int n = cost.rows();
    if (cost.cols() != n) throw DimensionError("solve_assignment: cost matrix must be square");
    // Row-by-row potential update with shortest augmenting paths; indices are
    // 1-based with 0 as the virtual start.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assignment(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) assignment[p[j] - 1] = j - 1;
    return assignment;
}

CouplingCost empirical_w1_exact(const SampleSet& a, const SampleSet& b) {
    if (a.dim != b.dim) throw DimensionError("empirical_w1_exact: dimension mismatch");
    if (a.n != b.n) throw UnsupportedError("empirical_w1_exact: sample sets must have equal size");
    if (a.n > 1024) throw UnsupportedError("empirical_w1_exact: capped at n <= 1024");
    const int n = static_cast<int>(a.n);
    const int d = a.dim;

    Matrix cost(n, n);
    for (int i = 0; i < n; ++i) {
        const double* ra = a.samples.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < n; ++j) {
            const double* rb = b.samples.data() + static_cast<std::size_t>(j) * d;
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = ra[k] - rb[k];
                s += diff * diff;
            }
            cost(i, j) = std::sqrt(s);
        }
    }
    const std::vector<int> assignment = solve_assignment(cost);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, assignment[i]);
    return CouplingCost{total / n, CouplingCost::Method::exact_assignment, 0.0};
}

}  // namespace lab
