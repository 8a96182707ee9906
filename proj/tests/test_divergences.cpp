#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "lab/divergences.hpp"

using namespace lab;

namespace {

constexpr double kLog2 = 0.6931471805599453;

double normal_pdf(double x, double var) {
    return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * M_PI * var);
}

// Simpson quadrature for the 1-d JSD between N(0, var_p) and N(0, var_q).
double jsd_quadrature(double var_p, double var_q) {
    const double lo = -60.0, hi = 60.0;
    const int n = 120000;  // even
    const double h = (hi - lo) / n;
    auto integrand = [&](double x) {
        const double p = normal_pdf(x, var_p);
        const double q = normal_pdf(x, var_q);
        const double m = 0.5 * (p + q);
        double acc = 0.0;
        if (p > 0.0) acc += 0.5 * p * std::log(p / m);
        if (q > 0.0) acc += 0.5 * q * std::log(q / m);
        return acc;
    };
    double s = integrand(lo) + integrand(hi);
    for (int i = 1; i < n; ++i) s += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("gaussian_kl: closed forms") {
    const GaussianDist p = GaussianDist::from_cov(Matrix::identity(3) * 0.7);
    CHECK(gaussian_kl(p, p) == doctest::Approx(0.0).epsilon(1e-12));

    const GaussianDist p1 = GaussianDist::from_cov(Matrix{{1.0}});
    const GaussianDist q1 = GaussianDist::from_cov(Matrix{{4.0}});
    CHECK(gaussian_kl(p1, q1) == doctest::Approx(0.5 * (0.25 - 1.0 + std::log(4.0))).epsilon(1e-12));

    const GaussianDist full = GaussianDist::from_cov(Matrix::identity(2));
    const GaussianDist rank1 = GaussianDist::from_cov(Matrix{{1.0, 1.0}, {1.0, 1.0}});
    CHECK(std::isinf(gaussian_kl(full, rank1)));
    CHECK(gaussian_kl(full, rank1) > 0.0);
    // contained support with lower rank is also singular
    CHECK(std::isinf(gaussian_kl(rank1, full)));
}

TEST_CASE("gaussian_kl: degenerate pair on the same support is finite") {
    // both rank-1 on the same line, different scales
    const GaussianDist p = GaussianDist::from_cov(Matrix{{1.0, 1.0}, {1.0, 1.0}});
    const GaussianDist q = GaussianDist::from_cov(Matrix{{4.0, 4.0}, {4.0, 4.0}});
    // reduces to KL(N(0,2) || N(0,8)) on the support coordinate
    const double expected = 0.5 * (2.0 / 8.0 - 1.0 + std::log(8.0 / 2.0));
    CHECK(gaussian_kl(p, q) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("jsd_gaussian: rank mismatch saturates exactly") {
    const GaussianDist p = GaussianDist::from_cov(Matrix{{0.9, 0.1}, {0.1, 0.7}});
    const GaussianDist q = GaussianDist::from_cov(Matrix{{1.0, 1.0}, {1.0, 1.0}});
    const JsdEstimate est = jsd_gaussian(p, q, 1000, RngStream(1, 0));
    CHECK(est.analytic);
    CHECK(est.value == std::log(2.0));
    CHECK(est.std_err == 0.0);
}

TEST_CASE("jsd_gaussian: saturation invariance over 50 random rank-1 generators") {
    const CovarianceModel cov = generate_covariance(2, RngStream(2, 0));
    const GaussianDist p = GaussianDist::from_cov(cov.k_y);
    RngStream rng(2, 1);
    for (int t = 0; t < 50; ++t) {
        Matrix g(2, 1);
        g(0, 0) = rng.normal();
        g(1, 0) = rng.normal();
        const GaussianDist q = GaussianDist::from_cov(symmetrized(g * g.transposed()));
        const JsdEstimate est = jsd_gaussian(p, q, 100, RngStream(2, 100 + t));
        CHECK(est.value == std::log(2.0));
    }
}

TEST_CASE("jsd_gaussian: identical distributions give zero") {
    const GaussianDist p = GaussianDist::from_cov(Matrix{{1.3, 0.2}, {0.2, 0.8}});
    const JsdEstimate est = jsd_gaussian(p, p, 2000, RngStream(3, 0));
    CHECK(est.value <= 3.0 * est.std_err + 1e-12);
    CHECK(est.value <= 1e-12);
}

TEST_CASE("jsd_gaussian: 1-d Monte Carlo against quadrature") {
    const GaussianDist p = GaussianDist::from_cov(Matrix{{1.0}});
    const GaussianDist q = GaussianDist::from_cov(Matrix{{4.0}});
    const double oracle = jsd_quadrature(1.0, 4.0);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const JsdEstimate est = jsd_gaussian(p, q, 200000, RngStream(seed, 0));
        CHECK_FALSE(est.analytic);
        CHECK(est.value > 0.0);
        CHECK(est.value < kLog2);
        CHECK(std::fabs(est.value - oracle) <= 3.0 * est.std_err);
    }
}

TEST_CASE("jsd_gaussian: values always land in [0, log 2]") {
    RngStream rng(4, 0);
    for (int t = 0; t < 10; ++t) {
        const CovarianceModel a = generate_covariance(2, rng.substream(2 * t));
        const CovarianceModel b = generate_covariance(2, rng.substream(2 * t + 1));
        const JsdEstimate est =
            jsd_gaussian(GaussianDist::from_cov(a.k_y), GaussianDist::from_cov(b.k_y), 2000,
                         RngStream(4, 100 + t));
        CHECK(est.value >= 0.0);
        CHECK(est.value <= kLog2);
    }
}

TEST_CASE("optimal_discriminator") {
    CHECK(optimal_discriminator(0.3, 0.3) == 0.5);
    CHECK(optimal_discriminator(0.7, 0.0) == 1.0);
    CHECK(optimal_discriminator(0.2, 0.6) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(optimal_discriminator(0.0, 0.0), DomainError);
    CHECK_THROWS_AS(optimal_discriminator(-0.1, 0.5), DomainError);
}

TEST_CASE("projection_coupling_cost: closed form and bit-equality with residual_objective") {
    const CovarianceModel cov = CovarianceModel::from_matrix(Matrix{{0.8, 0.0}, {0.0, 0.6}});
    const SubspaceBasis e1{Matrix{{1.0}, {0.0}}};
    const CouplingCost cost = projection_coupling_cost(cov, e1, 1000000, RngStream(5, 0));
    CHECK(cost.method == CouplingCost::Method::projection);
    CHECK(std::fabs(cost.cost - std::sqrt(2.0 * 0.6 / M_PI)) <= 3.0 * cost.std_err);

    const McEstimate direct = residual_objective(cov, e1, 1000000, RngStream(5, 0));
    CHECK(cost.cost == direct.estimate);
    CHECK(cost.std_err == direct.std_err);

    const SubspaceBasis full{Matrix::identity(2)};
    CHECK(projection_coupling_cost(cov, full, 1000, RngStream(5, 1)).cost == 0.0);
}

TEST_CASE("empirical_w1_exact: identical point sets cost zero") {
    const CovarianceModel cov = generate_covariance(2, RngStream(6, 0));
    const SampleSet a = sample_gaussian(cov, 32, RngStream(6, 1));
    SampleSet shuffled = a;
    for (long i = 0; i < a.n; ++i)
        for (int j = 0; j < 2; ++j)
            shuffled.samples(static_cast<int>(a.n - 1 - i), j) = a.samples(static_cast<int>(i), j);
    const CouplingCost c = empirical_w1_exact(a, shuffled);
    CHECK(c.cost == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(c.method == CouplingCost::Method::exact_assignment);
    CHECK(c.std_err == 0.0);
}

TEST_CASE("empirical_w1_exact: 1-d singletons") {
    SampleSet a, b;
    a.n = b.n = 1;
    a.dim = b.dim = 1;
    a.samples = Matrix{{0.0}};
    b.samples = Matrix{{3.0}};
    CHECK(empirical_w1_exact(a, b).cost == 3.0);
}

TEST_CASE("empirical_w1_exact: matches factorial brute force at n=8") {
    RngStream rng(7, 0);
    SampleSet a, b;
    a.n = b.n = 8;
    a.dim = b.dim = 2;
    a.samples = Matrix(8, 2);
    b.samples = Matrix(8, 2);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 2; ++j) {
            a.samples(i, j) = rng.normal();
            b.samples(i, j) = rng.normal();
        }
    const double exact = empirical_w1_exact(a, b).cost;

    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double total = 0.0;
        for (int i = 0; i < 8; ++i) {
            const double dx = a.samples(i, 0) - b.samples(perm[i], 0);
            const double dy = a.samples(i, 1) - b.samples(perm[i], 1);
            total += std::sqrt(dx * dx + dy * dy);
        }
        best = std::min(best, total / 8.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(exact == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("empirical_w1_exact: guards") {
    SampleSet a, b;
    a.n = 4;
    b.n = 5;
    a.dim = b.dim = 1;
    a.samples = Matrix(4, 1);
    b.samples = Matrix(5, 1);
    CHECK_THROWS_AS(empirical_w1_exact(a, b), UnsupportedError);
    b.n = 4;
    b.samples = Matrix(4, 2);
    b.dim = 2;
    CHECK_THROWS_AS(empirical_w1_exact(a, b), DimensionError);
    SampleSet big_a, big_b;
    big_a.n = big_b.n = 2000;
    big_a.dim = big_b.dim = 1;
    big_a.samples = Matrix(2000, 1);
    big_b.samples = Matrix(2000, 1);
    CHECK_THROWS_AS(empirical_w1_exact(big_a, big_b), UnsupportedError);
}

TEST_CASE("lemma-1 consistency: exact assignment vs projection coupling at d=2") {
    const CovarianceModel cov = CovarianceModel::from_matrix(Matrix{{0.8, 0.0}, {0.0, 0.6}});
    const SubspaceBasis e1{Matrix{{1.0}, {0.0}}};
    const int n = 512;

    const CouplingCost proj = projection_coupling_cost(cov, e1, 1000000, RngStream(8, 0));

    std::vector<double> exact_costs;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const SampleSet a = sample_gaussian(cov, n, RngStream(8, 10 + 2 * s));
        SampleSet b = sample_gaussian(cov, n, RngStream(8, 11 + 2 * s));
        for (int i = 0; i < n; ++i) b.samples(i, 1) = 0.0;  // U U^T maps onto the first axis
        exact_costs.push_back(empirical_w1_exact(a, b).cost);

        // exact assignment never exceeds the paired projection coupling cost
        SampleSet paired = a;
        for (int i = 0; i < n; ++i) paired.samples(i, 1) = 0.0;
        double paired_cost = 0.0;
        for (int i = 0; i < n; ++i) paired_cost += std::fabs(a.samples(i, 1));
        paired_cost /= n;
        CHECK(empirical_w1_exact(a, paired).cost <= paired_cost + 1e-12);
    }
    double mean = 0.0;
    for (double c : exact_costs) mean += c;
    mean /= exact_costs.size();
    double var = 0.0;
    for (double c : exact_costs) var += (c - mean) * (c - mean);
    const double spread = std::sqrt(var / (exact_costs.size() - 1));
    CHECK(std::fabs(proj.cost - mean) <= 4.0 * (proj.std_err + spread));
}

TEST_CASE("solve_assignment: optimal on random matrices vs brute force") {
    RngStream rng(9, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 5);
        Matrix cost(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) cost(i, j) = rng.uniform_range(0.0, 10.0);

        const std::vector<int> assignment = solve_assignment(cost);
        double total = 0.0;
        std::vector<bool> used(n, false);
        for (int i = 0; i < n; ++i) {
            CHECK(assignment[i] >= 0);
            CHECK_FALSE(used[assignment[i]]);
            used[assignment[i]] = true;
            total += cost(i, assignment[i]);
        }
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double t = 0.0;
            for (int i = 0; i < n; ++i) t += cost(i, perm[i]);
            best = std::min(best, t);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(total == doctest::Approx(best).epsilon(1e-12));
    }
}
