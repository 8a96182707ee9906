#include <cmath>

#include "doctest.h"
#include "lab/matrix.hpp"
#include "lab/rng.hpp"

using namespace lab;

namespace {

Matrix random_symmetric(int n, RngStream& rng, double scale = 1.0) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = scale * rng.normal();
            a(i, j) = v;
            a(j, i) = v;
        }
    return a;
}

}  // namespace

TEST_CASE("sym_eig: diagonal matrix") {
    const EigenDecomposition eig = sym_eig(Matrix{{2.0, 0.0}, {0.0, 1.0}});
    CHECK(eig.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(eig.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(eig.eigenvectors(0, 0) == doctest::Approx(1.0));
    CHECK(eig.eigenvectors(1, 0) == doctest::Approx(0.0));
    CHECK(eig.eigenvectors(0, 1) == doctest::Approx(0.0));
    CHECK(eig.eigenvectors(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig: exchange matrix") {
    const EigenDecomposition eig = sym_eig(Matrix{{0.0, 1.0}, {1.0, 0.0}});
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(eig.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(eig.eigenvalues[1] == doctest::Approx(-1.0).epsilon(1e-14));
    // sign convention: first nonzero component positive
    CHECK(eig.eigenvectors(0, 0) == doctest::Approx(inv_sqrt2));
    CHECK(eig.eigenvectors(1, 0) == doctest::Approx(inv_sqrt2));
    CHECK(eig.eigenvectors(0, 1) == doctest::Approx(inv_sqrt2));
    CHECK(eig.eigenvectors(1, 1) == doctest::Approx(-inv_sqrt2));
}

TEST_CASE("sym_eig: random 8x8 reconstructs") {
    RngStream rng(42, 0);
    const Matrix a = random_symmetric(8, rng);
    const EigenDecomposition eig = sym_eig(a);
    const Matrix rec = eig.eigenvectors * Matrix::diag(eig.eigenvalues) * eig.eigenvectors.transposed();
    CHECK(frobenius_distance(rec, a) <= 1e-9);
}

TEST_CASE("sym_eig: reconstruction and orthonormality over random sizes") {
    RngStream rng(7, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 11);
        const Matrix a = random_symmetric(n, rng, 1.0 + 5.0 * rng.uniform());
        const EigenDecomposition eig = sym_eig(a);
        const Matrix rec = eig.eigenvectors * Matrix::diag(eig.eigenvalues) * eig.eigenvectors.transposed();
        CHECK(frobenius_distance(rec, a) <= 1e-9 * std::max(1.0, frobenius_norm(a)));
        const Matrix gram = eig.eigenvectors.transposed() * eig.eigenvectors;
        CHECK(frobenius_distance(gram, Matrix::identity(n)) <= 1e-10);
        for (int k = 1; k < n; ++k) CHECK(eig.eigenvalues[k - 1] >= eig.eigenvalues[k]);
    }
}

TEST_CASE("sym_eig: rejects bad input") {
    CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DimensionError);
    Matrix nan_mat(2, 2);
    nan_mat(0, 0) = std::nan("");
    CHECK_THROWS_AS(sym_eig(nan_mat), DomainError);
}

TEST_CASE("cholesky_factor: identity and diagonal") {
    const Matrix li = cholesky_factor(Matrix::identity(3));
    CHECK(frobenius_distance(li, Matrix::identity(3)) == 0.0);

    const Matrix ld = cholesky_factor(Matrix{{4.0, 0.0}, {0.0, 9.0}});
    CHECK(ld(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(ld(1, 1) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(ld(0, 1) == 0.0);
    CHECK(ld(1, 0) == 0.0);
}

TEST_CASE("cholesky_factor: semidefinite rank-1 path") {
    const Matrix a{{1.0, 1.0}, {1.0, 1.0}};
    const Matrix l = cholesky_factor(a);
    CHECK(l(0, 1) == 0.0);  // lower triangular
    CHECK(frobenius_distance(l * l.transposed(), a) <= 1e-9);
}

TEST_CASE("cholesky_factor: indefinite input rejected") {
    CHECK_THROWS_AS(cholesky_factor(Matrix{{1.0, 0.0}, {0.0, -1.0}}), DomainError);
}

TEST_CASE("cholesky_factor: PSD round trip on random Gram matrices") {
    RngStream rng(11, 2);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 7);
        const int k = 1 + static_cast<int>(rng.next_u64() % n);  // rank k <= n
        Matrix b(n, k);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) b(i, j) = rng.normal();
        const Matrix a = symmetrized(b * b.transposed());
        const Matrix l = cholesky_factor(a);
        CHECK(frobenius_distance(l * l.transposed(), a) <= 1e-9 * std::max(1.0, frobenius_norm(a)));
    }
}

TEST_CASE("frobenius_distance: examples") {
    const Matrix a{{0.8, 0.0}, {0.0, 0.6}};
    CHECK(frobenius_distance(a, a) == 0.0);
    CHECK(frobenius_distance(a, Matrix{{0.8, 0.0}, {0.0, 0.0}}) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(frobenius_distance(Matrix::identity(2), Matrix(2, 2)) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(frobenius_distance(Matrix(2, 2), Matrix(3, 3)), DimensionError);
}

TEST_CASE("frobenius_distance: triangle inequality on random triples") {
    RngStream rng(3, 3);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 5);
        const Matrix a = random_symmetric(n, rng), b = random_symmetric(n, rng), c = random_symmetric(n, rng);
        CHECK(frobenius_distance(a, c) <=
              frobenius_distance(a, b) + frobenius_distance(b, c) + 1e-12);
    }
}
