#include "lab/optim.hpp"

#include <cmath>

#include "lab/errors.hpp"

namespace lab {

namespace {

std::vector<std::vector<double>> zeros_like(const std::vector<const Matrix*>& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const Matrix* p : params) out.emplace_back(p->size(), 0.0);
    return out;
}

void check_shapes(const OptimizerState& state, const std::vector<Matrix*>& params,
                  const std::vector<std::vector<double>>& grads) {
    if (params.size() != grads.size() || params.size() != state.v.size())
        throw DimensionError("optimizer: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i]->size() != grads[i].size() || params[i]->size() != state.v[i].size())
            throw DimensionError("optimizer: parameter/gradient shape mismatch");
}

}  // namespace

OptimizerState OptimizerState::adam(const std::vector<const Matrix*>& params, double beta1, double beta2) {
    OptimizerState s;
    s.kind = Kind::adam;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    return s;
}

OptimizerState OptimizerState::rmsprop(const std::vector<const Matrix*>& params, double rho) {
    OptimizerState s;
    s.kind = Kind::rmsprop;
    s.rho = rho;
    s.v = zeros_like(params);
    return s;
}

void adam_step(OptimizerState& state, const std::vector<Matrix*>& params,
               const std::vector<std::vector<double>>& grads, double lr) {
    if (state.kind != OptimizerState::Kind::adam) throw DomainError("adam_step: state is not adam");
    check_shapes(state, params, grads);
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* theta = params[i]->data();
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        const double* g = grads[i].data();
        const std::size_t n = grads[i].size();
        for (std::size_t c = 0; c < n; ++c) {
            m[c] = state.beta1 * m[c] + (1.0 - state.beta1) * g[c];
            v[c] = state.beta2 * v[c] + (1.0 - state.beta2) * g[c] * g[c];
            const double m_hat = m[c] / bc1;
            const double v_hat = v[c] / bc2;
            theta[c] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

void rmsprop_step(OptimizerState& state, const std::vector<Matrix*>& params,
                  const std::vector<std::vector<double>>& grads, double lr) {
    if (state.kind != OptimizerState::Kind::rmsprop) throw DomainError("rmsprop_step: state is not rmsprop");
    check_shapes(state, params, grads);
    ++state.step_count;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* theta = params[i]->data();
        double* v = state.v[i].data();
        const double* g = grads[i].data();
        const std::size_t n = grads[i].size();
        for (std::size_t c = 0; c < n; ++c) {
            v[c] = state.rho * v[c] + (1.0 - state.rho) * g[c] * g[c];
            theta[c] -= lr * g[c] / (std::sqrt(v[c]) + state.eps);
        }
    }
}

void clip_weights(const std::vector<Matrix*>& params, double c) {
    if (c <= 0.0) throw DomainError("clip_weights: c must be positive");
    for (Matrix* p : params)
        for (double* x = p->data(); x != p->data() + p->size(); ++x) {
            if (*x > c) *x = c;
            if (*x < -c) *x = -c;
        }
}

double lr_at(const LrSchedule& schedule, long iter) {
    if (iter < 0) throw DomainError("lr_at: iteration must be nonnegative");
    if (schedule.initial_lr <= 0.0 || schedule.decay_factor <= 0.0)
        throw DomainError("lr_at: invalid schedule");
    if (schedule.decay_every_epochs < 1 || schedule.epoch_size_iters < 1)
        throw DomainError("lr_at: period must be >= 1");
    const long period = schedule.decay_every_epochs * schedule.epoch_size_iters;
    const long k = iter / period;
    return schedule.initial_lr * std::pow(schedule.decay_factor, static_cast<double>(k));
}

}  // namespace lab
