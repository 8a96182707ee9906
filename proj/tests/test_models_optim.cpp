#include <cmath>

#include "doctest.h"
#include "lab/gaussian.hpp"
#include "lab/models.hpp"
#include "lab/optim.hpp"

using namespace lab;

TEST_CASE("glorot_init: bound, zero biases, determinism") {
    const double bound = std::sqrt(6.0 / 128.0);
    const CriticNet net = glorot_init({64, 64, 1}, RngStream(1, 0));
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j) {
            CHECK(net.weights[0](i, j) > -bound);
            CHECK(net.weights[0](i, j) < bound);
        }
    for (const Matrix& b : net.biases)
        for (double x : b.values()) CHECK(x == 0.0);

    const CriticNet again = glorot_init({64, 64, 1}, RngStream(1, 0));
    CHECK(frobenius_distance(net.weights[0], again.weights[0]) == 0.0);
    CHECK(frobenius_distance(net.weights[1], again.weights[1]) == 0.0);

    CHECK_THROWS_AS(glorot_init({4}, RngStream(1, 0)), DomainError);
}

TEST_CASE("generator_forward: closed forms and exact linearity") {
    LinearGenerator zero;
    zero.g = Matrix(3, 2);
    const Matrix out0 = generator_forward(zero, Matrix{{1.0, 2.0}});
    CHECK(frobenius_norm(out0) == 0.0);

    LinearGenerator embed;
    embed.g = Matrix{{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}};
    const Matrix out = generator_forward(embed, Matrix{{5.0, 7.0}});
    CHECK(out(0, 0) == 5.0);
    CHECK(out(0, 1) == 7.0);
    CHECK(out(0, 2) == 0.0);

    LinearGenerator gen = glorot_init_generator(4, 2, RngStream(2, 0));
    const Matrix x{{0.3, -1.2}};
    const Matrix y1 = generator_forward(gen, x);
    const Matrix y2 = generator_forward(gen, x * 2.0);
    for (int j = 0; j < 4; ++j) CHECK(y2(0, j) == 2.0 * y1(0, j));
}

TEST_CASE("generator_forward: output covariance approaches G G^T") {
    const LinearGenerator gen = glorot_init_generator(3, 2, RngStream(3, 0));
    const SampleSet latents = sample_latent(2, 100000, RngStream(3, 1));
    SampleSet fake;
    fake.n = latents.n;
    fake.dim = 3;
    fake.samples = generator_forward(gen, latents.samples);
    const Matrix emp = empirical_covariance(fake);
    const Matrix expected = symmetrized(gen.g * gen.g.transposed());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::fabs(emp(i, j) - expected(i, j)) < 0.02);
}

TEST_CASE("critic_forward: closed forms") {
    CriticNet zero;
    zero.layer_sizes = {3, 4, 1};
    zero.weights = {Matrix(4, 3), Matrix(1, 4)};
    zero.biases = {Matrix(4, 1), Matrix(1, 1)};
    const Matrix out = critic_forward(zero, Matrix{{1.0, -2.0, 0.5}});
    CHECK(out(0, 0) == 0.0);

    CriticNet affine;  // single layer, D(y) = y_1
    affine.layer_sizes = {2, 1};
    affine.weights = {Matrix{{1.0, 0.0}}};
    affine.biases = {Matrix(1, 1)};
    const Matrix scores = critic_forward(affine, Matrix{{3.5, -1.0}, {-2.0, 4.0}});
    CHECK(scores(0, 0) == 3.5);
    CHECK(scores(1, 0) == -2.0);
}

TEST_CASE("critic_forward: batch equals per-sample, plain equals tape") {
    const CriticNet net = glorot_init({5, 16, 16, 1}, RngStream(4, 0));
    RngStream rng(4, 1);
    Matrix batch(7, 5);
    for (std::size_t i = 0; i < batch.size(); ++i) batch.data()[i] = rng.normal();

    const Matrix batched = critic_forward(net, batch);
    for (int i = 0; i < 7; ++i) {
        Matrix row(1, 5);
        for (int j = 0; j < 5; ++j) row(0, j) = batch(i, j);
        const Matrix single = critic_forward(net, row);
        CHECK(single(0, 0) == batched(i, 0));
    }

    Tape tape;
    const Var scores = critic_forward(net, batch, tape);
    const std::vector<double>& tape_vals = tape.value(scores);
    for (int i = 0; i < 7; ++i) CHECK(tape_vals[i] == batched(i, 0));
}

TEST_CASE("clipped critic satisfies the per-layer operator norm bound") {
    CriticNet net = glorot_init({8, 16, 1}, RngStream(5, 0));
    std::vector<Matrix*> params;
    for (Matrix& w : net.weights) params.push_back(&w);
    const double c = 0.01;
    clip_weights(params, c);
    for (const Matrix& w : net.weights) {
        const EigenDecomposition eig = sym_eig(w.transposed() * w);
        const double op_norm = std::sqrt(std::max(0.0, eig.eigenvalues.front()));
        CHECK(op_norm <= c * std::sqrt(static_cast<double>(w.rows()) * w.cols()) + 1e-12);
    }
}

TEST_CASE("checkpoint: bitwise JSON round trip") {
    const LinearGenerator gen = glorot_init_generator(4, 2, RngStream(6, 0));
    const CriticNet net = glorot_init({4, 8, 1}, RngStream(6, 1));
    const std::string text = checkpoint_to_json(gen, net);
    LinearGenerator gen2;
    CriticNet net2;
    checkpoint_from_json(text, gen2, net2);
    CHECK(frobenius_distance(gen.g, gen2.g) == 0.0);
    CHECK(net2.layer_sizes == net.layer_sizes);
    for (int l = 0; l < net.n_layers(); ++l) {
        CHECK(frobenius_distance(net.weights[l], net2.weights[l]) == 0.0);
        CHECK(frobenius_distance(net.biases[l], net2.biases[l]) == 0.0);
    }
}

TEST_CASE("adam_step: first step moves by about -lr * sign(g)") {
    Matrix theta(1, 1);
    std::vector<Matrix*> params = {&theta};
    OptimizerState state = OptimizerState::adam({&theta}, 0.5, 0.9);
    adam_step(state, params, {{0.5}}, 1e-3);
    CHECK(theta(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam_step: zero gradients leave parameters unchanged") {
    Matrix theta{{0.7, -0.3}};
    std::vector<Matrix*> params = {&theta};
    OptimizerState state = OptimizerState::adam({&theta}, 0.5, 0.9);
    for (int i = 0; i < 5; ++i) adam_step(state, params, {{0.0, 0.0}}, 1e-2);
    CHECK(theta(0, 0) == 0.7);
    CHECK(theta(0, 1) == -0.3);
}

TEST_CASE("adam_step: matches the hand-unrolled recurrence") {
    const double g = 0.37, lr = 2e-3, b1 = 0.5, b2 = 0.9, eps = 1e-8;
    Matrix theta{{1.0}};
    std::vector<Matrix*> params = {&theta};
    OptimizerState state = OptimizerState::adam({&theta}, b1, b2);

    double m = 0.0, v = 0.0, expected = 1.0;
    for (int t = 1; t <= 2; ++t) {
        adam_step(state, params, {{g}}, lr);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        expected -= lr * mh / (std::sqrt(vh) + eps);
        CHECK(theta(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("rmsprop_step: first-step value and invariances") {
    Matrix theta{{0.0}};
    std::vector<Matrix*> params = {&theta};
    OptimizerState state = OptimizerState::rmsprop({&theta}, 0.9);
    rmsprop_step(state, params, {{1.0}}, 0.01);
    CHECK(theta(0, 0) == doctest::Approx(-0.01 / (std::sqrt(0.1) + 1e-8)).epsilon(1e-12));

    Matrix unchanged{{2.0}};
    std::vector<Matrix*> params2 = {&unchanged};
    OptimizerState state2 = OptimizerState::rmsprop({&unchanged}, 0.9);
    rmsprop_step(state2, params2, {{0.0}}, 0.01);
    CHECK(unchanged(0, 0) == 2.0);

    // direction is scale-free in the gradient
    Matrix a{{0.0}}, b{{0.0}};
    std::vector<Matrix*> pa = {&a}, pb = {&b};
    OptimizerState sa = OptimizerState::rmsprop({&a}, 0.9);
    OptimizerState sb = OptimizerState::rmsprop({&b}, 0.9);
    rmsprop_step(sa, pa, {{0.4}}, 0.01);
    rmsprop_step(sb, pb, {{0.8}}, 0.01);
    CHECK(a(0, 0) < 0.0);
    CHECK(b(0, 0) < 0.0);
    CHECK(a(0, 0) == doctest::Approx(b(0, 0)).epsilon(1e-6));
}

TEST_CASE("optimizer shape and kind guards") {
    Matrix theta{{1.0}};
    std::vector<Matrix*> params = {&theta};
    OptimizerState adam_state = OptimizerState::adam({&theta}, 0.5, 0.9);
    CHECK_THROWS_AS(rmsprop_step(adam_state, params, {{1.0}}, 0.01), DomainError);
    CHECK_THROWS_AS(adam_step(adam_state, params, {{1.0, 2.0}}, 0.01), DimensionError);
}

TEST_CASE("clip_weights: examples and idempotence") {
    Matrix w{{0.5, -0.005, 0.01}};
    std::vector<Matrix*> params = {&w};
    clip_weights(params, 0.01);
    CHECK(w(0, 0) == 0.01);
    CHECK(w(0, 1) == -0.005);
    CHECK(w(0, 2) == 0.01);
    const Matrix once = w;
    clip_weights(params, 0.01);
    CHECK(frobenius_distance(once, w) == 0.0);
    for (double x : w.values()) CHECK(std::fabs(x) <= 0.01);
    CHECK_THROWS_AS(clip_weights(params, 0.0), DomainError);
}

TEST_CASE("lr_at: stepwise decay") {
    const LrSchedule s{1e-3, 0.1, 5, 250};
    CHECK(lr_at(s, 0) == 1e-3);
    CHECK(lr_at(s, 1249) == 1e-3);
    CHECK(lr_at(s, 1250) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(lr_at(s, 2500) == doctest::Approx(1e-5).epsilon(1e-12));

    const LrSchedule constant{5e-4, 1.0, 5, 250};
    CHECK(lr_at(constant, 0) == 5e-4);
    CHECK(lr_at(constant, 100000) == 5e-4);
    CHECK_THROWS_AS(lr_at(s, -1), DomainError);
}
