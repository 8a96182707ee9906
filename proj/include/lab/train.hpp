#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lab/gaussian.hpp"
#include "lab/models.hpp"
#include "lab/optim.hpp"
#include "lab/pca.hpp"

namespace lab {

struct TrainConfig {
    enum class Algorithm { wc, gp };

    int d = 16;
    int r = 4;
    long n = 50000;
    int batch = 200;
    Algorithm algorithm = Algorithm::gp;
    double lambda = 0.1;   // gradient-penalty weight
    double clip_c = 0.01;  // weight-clipping bound
    int critic_steps_per_gen = 5;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double rmsprop_rho = 0.9;
    LrSchedule lr{1e-3, 0.1, 5, 0};  // epoch_size_iters 0 -> ceil(n / batch)
    long max_gen_iters = 3000;
    std::uint64_t seed = 1;
    std::vector<int> critic_hidden = {64, 64, 64};
    long log_every = 10;
    double gradnorm_eps = 1e-12;

    void validate() const;
};

struct RunRecord {
    long gen_iter = 0;
    double wall_seconds = 0.0;
    double frob_to_truth = 0.0;          // ||K_Y - G G^T||_F
    double frob_to_empirical_pca = 0.0;  // ||G G^T - empirical r-PCA gram||_F
    double critic_loss = 0.0;            // dual objective (penalized for gp)
    double gen_loss = 0.0;               // -mean D(fake)
};

struct RunLog {
    std::vector<RunRecord> records;
    bool aborted = false;
    std::string abort_reason;
};

struct TrainResult {
    LinearGenerator generator;
    CriticNet critic;
    RunLog log;
};

struct CriticUpdateResult {
    double objective = 0.0;  // value the critic ascends
    double penalty = 0.0;    // gradient-penalty term (gp only)
};

// Gradient of -(mean D(real) - mean D(fake)) w.r.t. critic parameters,
// ordered W0, b0, W1, b1, ...
std::vector<std::vector<double>> critic_dual_gradients(const CriticNet& critic, const Matrix& real_batch,
                                                       const Matrix& fake_batch, double* objective = nullptr);

// Gradient of -(mean D(real) - mean D(fake) - lambda mean (||grad D(xhat)|| - 1)^2)
// with explicit interpolates.
std::vector<std::vector<double>> critic_gp_gradients(const CriticNet& critic, const Matrix& real_batch,
                                                     const Matrix& fake_batch, const Matrix& xhat,
                                                     double lambda, double gradnorm_eps,
                                                     double* objective = nullptr, double* penalty = nullptr);

// One RMSProp ascent step on the dual, then weight clipping.
CriticUpdateResult critic_update_wc(CriticNet& critic, OptimizerState& state, const TrainConfig& config,
                                    const Matrix& real_batch, const Matrix& fake_batch, double lr);

// One Adam ascent step on the penalized dual; interpolates drawn from rng.
CriticUpdateResult critic_update_gp(CriticNet& critic, OptimizerState& state, const TrainConfig& config,
                                    const Matrix& real_batch, const Matrix& fake_batch, RngStream& rng,
                                    double lr);

// Gradient of -mean D(G x) w.r.t. G (flat row-major).
std::vector<double> generator_gradient(const LinearGenerator& gen, const CriticNet& critic,
                                       const Matrix& latent_batch, double* loss = nullptr);

// One optimizer step on G against -mean D(G x); returns the loss.
double generator_update(LinearGenerator& gen, OptimizerState& state, const CriticNet& critic,
                        const Matrix& latent_batch, double lr);

// The full minimax loop. `truth` supplies K_Y for the logged metrics.
TrainResult train(const TrainConfig& config, const CovarianceModel& truth, const SampleSet& data);

std::string runlog_to_csv(const RunLog& log);
RunLog runlog_from_csv(const std::string& text);

}  // namespace lab
