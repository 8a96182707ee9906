#pragma once

#include <string>
#include <vector>

#include "lab/matrix.hpp"
#include "lab/rng.hpp"
#include "lab/tape.hpp"

namespace lab {

// The generator is a bare d x r matrix, no bias.
struct LinearGenerator {
    Matrix g;
    int d() const { return g.rows(); }
    int r() const { return g.cols(); }
};

// Fully connected ReLU critic; the final layer is affine with no activation.
struct CriticNet {
    std::vector<int> layer_sizes;  // input, hidden..., 1
    std::vector<Matrix> weights;   // per layer, out x in
    std::vector<Matrix> biases;    // per layer, out x 1
    int input_dim() const { return layer_sizes.front(); }
    int n_layers() const { return static_cast<int>(weights.size()); }
};

// Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)); zero biases.
CriticNet glorot_init(const std::vector<int>& layer_sizes, RngStream rng);

// Glorot-initialized d x r generator matrix.
LinearGenerator glorot_init_generator(int d, int r, RngStream rng);

// Batched y = G x, latents as rows: (n x r) -> (n x d).
Matrix generator_forward(const LinearGenerator& gen, const Matrix& latents);

// Plain batched critic evaluation, (n x d) -> (n x 1).
Matrix critic_forward(const CriticNet& net, const Matrix& y_batch);

// Critic parameters recorded on a tape, for differentiation.
struct CriticVars {
    std::vector<Var> weights;
    std::vector<Var> biases;
    std::vector<Var> all() const;
};
CriticVars record_critic_params(Tape& tape, const CriticNet& net, bool as_constants = false);

// Forward pass over previously recorded parameters; y_batch is B x d on the
// tape, result is B x 1.
Var critic_scores(Tape& tape, const CriticVars& params, Var y_batch);

// Records the batch and the parameters (as constants) and returns the scores.
Var critic_forward(const CriticNet& net, const Matrix& y_batch, Tape& tape);

// Checkpoint round-trip; JSON with layer sizes and flat row-major arrays.
std::string checkpoint_to_json(const LinearGenerator& gen, const CriticNet& critic);
void checkpoint_from_json(const std::string& text, LinearGenerator& gen, CriticNet& critic);
void write_checkpoint(const LinearGenerator& gen, const CriticNet& critic, const std::string& path);
void read_checkpoint(const std::string& path, LinearGenerator& gen, CriticNet& critic);

}  // namespace lab
