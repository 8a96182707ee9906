#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lab/gaussian.hpp"
#include "lab/rng.hpp"

using namespace lab;

TEST_CASE("rng: identical (seed, stream) reproduces; distinct streams differ") {
    RngStream a(123, 5), b(123, 5), c(123, 6);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t x = a.next_u64();
        all_equal = all_equal && (x == b.next_u64());
        any_diff = any_diff || (x != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng: streams from one seed do not overlap in the first 1e6 draws") {
    const long n = 1000000;
    std::vector<std::uint64_t> s0(n), s1(n);
    RngStream a(99, 0), b(99, 1);
    for (long i = 0; i < n; ++i) s0[i] = a.next_u64();
    for (long i = 0; i < n; ++i) s1[i] = b.next_u64();
    std::sort(s0.begin(), s0.end());
    std::sort(s1.begin(), s1.end());
    std::vector<std::uint64_t> common;
    std::set_intersection(s0.begin(), s0.end(), s1.begin(), s1.end(), std::back_inserter(common));
    CHECK(common.empty());
}

TEST_CASE("rng: normal moments") {
    RngStream rng(17, 0);
    const long n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    CHECK(std::fabs(sum / n) < 0.005);
    CHECK(std::fabs(sum_sq / n - 1.0) < 0.01);
}

TEST_CASE("generate_covariance: unit Frobenius norm at d=32") {
    const CovarianceModel cov = generate_covariance(32, RngStream(1, 0));
    CHECK(std::fabs(frobenius_norm(cov.k_y) - 1.0) <= 1e-10);
}

TEST_CASE("generate_covariance: deterministic in (seed, d)") {
    const CovarianceModel a = generate_covariance(8, RngStream(5, 2));
    const CovarianceModel b = generate_covariance(8, RngStream(5, 2));
    CHECK(frobenius_distance(a.k_y, b.k_y) == 0.0);
}

TEST_CASE("generate_covariance: PSD across 100 seeds at d=8") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const CovarianceModel cov = generate_covariance(8, RngStream(seed, 0));
        CHECK(cov.eig.eigenvalues.back() >= -1e-10);
    }
}

TEST_CASE("generate_covariance: rejects d < 2") {
    CHECK_THROWS_AS(generate_covariance(1, RngStream(1, 0)), DomainError);
}

TEST_CASE("sample_gaussian: deterministic single draw") {
    const CovarianceModel cov = CovarianceModel::from_matrix(Matrix::identity(2));
    const SampleSet a = sample_gaussian(cov, 1, RngStream(4, 4));
    const SampleSet b = sample_gaussian(cov, 1, RngStream(4, 4));
    CHECK(a.samples(0, 0) == b.samples(0, 0));
    CHECK(a.samples(0, 1) == b.samples(0, 1));
}

TEST_CASE("sample_gaussian: empirical covariance approaches K_Y") {
    const CovarianceModel cov = CovarianceModel::from_matrix(Matrix{{0.8, 0.0}, {0.0, 0.6}});
    const SampleSet s = sample_gaussian(cov, 100000, RngStream(21, 0));
    const Matrix emp = empirical_covariance(s);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(std::fabs(emp(i, j) - cov.k_y(i, j)) < 0.02);
}

TEST_CASE("sample_gaussian: degenerate covariance stays on its support line") {
    const CovarianceModel cov = CovarianceModel::from_matrix(Matrix{{0.5, 0.5}, {0.5, 0.5}});
    const SampleSet s = sample_gaussian(cov, 200, RngStream(9, 0));
    for (long i = 0; i < s.n; ++i)
        CHECK(std::fabs(s.samples(static_cast<int>(i), 0) - s.samples(static_cast<int>(i), 1)) <= 1e-9);
}

TEST_CASE("sample_latent: unit variance and identity covariance") {
    const SampleSet one_dim = sample_latent(1, 1000000, RngStream(31, 0));
    double sum_sq = 0.0;
    for (long i = 0; i < one_dim.n; ++i) {
        const double x = one_dim.samples(static_cast<int>(i), 0);
        sum_sq += x * x;
    }
    CHECK(std::fabs(sum_sq / one_dim.n - 1.0) < 0.01);

    const SampleSet s = sample_latent(8, 100000, RngStream(32, 0));
    const Matrix emp = empirical_covariance(s);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            CHECK(std::fabs(emp(i, j) - (i == j ? 1.0 : 0.0)) < 0.05);

    const SampleSet a = sample_latent(3, 5, RngStream(33, 1));
    const SampleSet b = sample_latent(3, 5, RngStream(33, 1));
    CHECK(frobenius_distance(a.samples, b.samples) == 0.0);
}

TEST_CASE("empirical_covariance: closed-form examples") {
    SampleSet single;
    single.n = 1;
    single.dim = 2;
    single.samples = Matrix{{1.0, 2.0}};
    const Matrix c1 = empirical_covariance(single);
    CHECK(c1(0, 0) == 1.0);
    CHECK(c1(0, 1) == 2.0);
    CHECK(c1(1, 0) == 2.0);
    CHECK(c1(1, 1) == 4.0);

    SampleSet pair;
    pair.n = 2;
    pair.dim = 2;
    pair.samples = Matrix{{1.0, 0.0}, {-1.0, 0.0}};
    const Matrix c2 = empirical_covariance(pair);
    CHECK(c2(0, 0) == 1.0);
    CHECK(c2(0, 1) == 0.0);
    CHECK(c2(1, 1) == 0.0);
}

TEST_CASE("empirical_covariance: CLT rate halves the error when n quadruples") {
    const CovarianceModel cov = generate_covariance(4, RngStream(77, 0));
    const int n_seeds = 16;
    double err_small = 0.0, err_large = 0.0;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
        const SampleSet s1 = sample_gaussian(cov, 2500, RngStream(seed, 10));
        const SampleSet s2 = sample_gaussian(cov, 10000, RngStream(seed, 11));
        err_small += frobenius_distance(empirical_covariance(s1), cov.k_y);
        err_large += frobenius_distance(empirical_covariance(s2), cov.k_y);
    }
    const double ratio = err_large / err_small;
    CHECK(ratio > 0.25);
    CHECK(ratio < 0.75);
}

TEST_CASE("sample CSV: header and bitwise round trip") {
    const CovarianceModel cov = generate_covariance(3, RngStream(55, 0));
    const SampleSet s = sample_gaussian(cov, 17, RngStream(55, 1));
    const std::string text = samples_to_csv(s);
    CHECK(text.rfind("dim=3,n=17,seed=55", 0) == 0);
    const SampleSet back = samples_from_csv(text);
    CHECK(back.dim == s.dim);
    CHECK(back.n == s.n);
    CHECK(back.seed == s.seed);
    CHECK(frobenius_distance(back.samples, s.samples) == 0.0);
    CHECK_THROWS_AS(samples_from_csv("bogus\n1,2\n"), IoError);
}
