#pragma once

#include <vector>

#include "lab/matrix.hpp"

namespace lab {

struct OptimizerState {
    enum class Kind { adam, rmsprop };
    Kind kind = Kind::adam;
    long step_count = 0;
    std::vector<std::vector<double>> m;  // first moments (adam only)
    std::vector<std::vector<double>> v;  // second moments
    double beta1 = 0.5;
    double beta2 = 0.9;
    double rho = 0.9;
    double eps = 1e-8;

    static OptimizerState adam(const std::vector<const Matrix*>& params, double beta1, double beta2);
    static OptimizerState rmsprop(const std::vector<const Matrix*>& params, double rho);
};

// Bias-corrected Adam update, in place.
void adam_step(OptimizerState& state, const std::vector<Matrix*>& params,
               const std::vector<std::vector<double>>& grads, double lr);

// v <- rho v + (1 - rho) g^2; theta <- theta - lr g / (sqrt(v) + eps)
void rmsprop_step(OptimizerState& state, const std::vector<Matrix*>& params,
                  const std::vector<std::vector<double>>& grads, double lr);

// Clamp every entry to [-c, c].
void clip_weights(const std::vector<Matrix*>& params, double c);

struct LrSchedule {
    double initial_lr = 1e-3;
    double decay_factor = 0.1;
    long decay_every_epochs = 5;
    long epoch_size_iters = 1;
};

// initial_lr * decay_factor^floor(iter / (decay_every_epochs * epoch_size_iters))
double lr_at(const LrSchedule& schedule, long iter);

}  // namespace lab
