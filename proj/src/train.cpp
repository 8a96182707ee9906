#include "lab/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "lab/errors.hpp"
#include "lab/tape.hpp"

namespace lab {

void TrainConfig::validate() const {
    if (d < 1 || r < 1 || r > d) throw ConfigError("train config: bad dimensions");
    if (n < 1 || batch < 1 || batch > n) throw ConfigError("train config: batch must be in [1, n]");
    if (lambda <= 0.0 || clip_c <= 0.0) throw ConfigError("train config: lambda and c must be positive");
    if (critic_steps_per_gen < 1) throw ConfigError("train config: critic_steps_per_gen must be >= 1");
    if (max_gen_iters < 1) throw ConfigError("train config: max_gen_iters must be >= 1");
    if (log_every < 1) throw ConfigError("train config: log_every must be >= 1");
    if (critic_hidden.empty()) throw ConfigError("train config: critic needs at least one hidden layer");
}

namespace {

std::vector<Matrix*> param_ptrs(CriticNet& net) {
    std::vector<Matrix*> out;
    for (int l = 0; l < net.n_layers(); ++l) {
        out.push_back(&net.weights[l]);
        out.push_back(&net.biases[l]);
    }
    return out;
}

std::vector<const Matrix*> param_cptrs(const CriticNet& net) {
    std::vector<const Matrix*> out;
    for (int l = 0; l < net.n_layers(); ++l) {
        out.push_back(&net.weights[l]);
        out.push_back(&net.biases[l]);
    }
    return out;
}

}  // namespace

std::vector<std::vector<double>> critic_dual_gradients(const CriticNet& critic, const Matrix& real_batch,
                                                       const Matrix& fake_batch, double* objective) {
    Tape tape;
    const CriticVars params = record_critic_params(tape, critic);
    const Var mean_real = tape.mean(critic_scores(tape, params, tape.constant(real_batch)));
    const Var mean_fake = tape.mean(critic_scores(tape, params, tape.constant(fake_batch)));
    const Var dual = tape.sub(mean_real, mean_fake);
    const Var loss = tape.scale(dual, -1.0);
    tape.seal();
    if (objective) *objective = tape.scalar_value(dual);
    const std::vector<Var> wrt = params.all();
    return tape.backward_grad(loss, std::span<const Var>(wrt));
}

std::vector<std::vector<double>> critic_gp_gradients(const CriticNet& critic, const Matrix& real_batch,
                                                     const Matrix& fake_batch, const Matrix& xhat,
                                                     double lambda, double gradnorm_eps,
                                                     double* objective, double* penalty) {
    Tape tape;
    const CriticVars params = record_critic_params(tape, critic);
    const Var mean_real = tape.mean(critic_scores(tape, params, tape.constant(real_batch)));
    const Var mean_fake = tape.mean(critic_scores(tape, params, tape.constant(fake_batch)));
    const Var dual = tape.sub(mean_real, mean_fake);

    // per-sample input gradients: rows of d(sum of scores)/d(xhat)
    const Var xh = tape.input(xhat);
    const Var score_sum = tape.sum(critic_scores(tape, params, xh));
    const Var gx = tape.grad_graph(score_sum, xh);
    const Var norms = tape.row_l2norm(gx, gradnorm_eps);
    const Var ones = tape.constant(Matrix(xhat.rows(), 1, std::vector<double>(xhat.rows(), 1.0)));
    const Var pen = tape.mean(tape.square(tape.sub(norms, ones)));

    const Var penalized = tape.sub(dual, tape.scale(pen, lambda));
    const Var loss = tape.scale(penalized, -1.0);
    tape.seal();
    if (objective) *objective = tape.scalar_value(penalized);
    if (penalty) *penalty = tape.scalar_value(pen);
    const std::vector<Var> wrt = params.all();
    return tape.backward_grad(loss, std::span<const Var>(wrt));
}

CriticUpdateResult critic_update_wc(CriticNet& critic, OptimizerState& state, const TrainConfig& config,
                                    const Matrix& real_batch, const Matrix& fake_batch, double lr) {
    if (real_batch.rows() != fake_batch.rows()) throw DimensionError("critic update: batch size mismatch");
    CriticUpdateResult result;
    const auto grads = critic_dual_gradients(critic, real_batch, fake_batch, &result.objective);
    const auto params = param_ptrs(critic);
    rmsprop_step(state, params, grads, lr);
    clip_weights(params, config.clip_c);
    return result;
}

CriticUpdateResult critic_update_gp(CriticNet& critic, OptimizerState& state, const TrainConfig& config,
                                    const Matrix& real_batch, const Matrix& fake_batch, RngStream& rng,
                                    double lr) {
    if (real_batch.rows() != fake_batch.rows()) throw DimensionError("critic update: batch size mismatch");
    const int b = real_batch.rows();
    const int d = real_batch.cols();
    Matrix xhat(b, d);
    for (int i = 0; i < b; ++i) {
        const double u = rng.uniform();
        for (int j = 0; j < d; ++j)
            xhat(i, j) = u * real_batch(i, j) + (1.0 - u) * fake_batch(i, j);
    }
    CriticUpdateResult result;
    const auto grads = critic_gp_gradients(critic, real_batch, fake_batch, xhat, config.lambda,
                                           config.gradnorm_eps, &result.objective, &result.penalty);
    adam_step(state, param_ptrs(critic), grads, lr);
    return result;
}

std::vector<double> generator_gradient(const LinearGenerator& gen, const CriticNet& critic,
                                       const Matrix& latent_batch, double* loss) {
    if (latent_batch.cols() != gen.r()) throw DimensionError("generator_gradient: latent dimension mismatch");
    Tape tape;
    const Var gvar = tape.input(gen.g);
    const Var fake = tape.matmul(tape.constant(latent_batch), tape.transpose(gvar));
    const CriticVars params = record_critic_params(tape, critic, /*as_constants=*/true);
    const Var loss_var = tape.scale(tape.mean(critic_scores(tape, params, fake)), -1.0);
    tape.seal();
    if (loss) *loss = tape.scalar_value(loss_var);
    return tape.backward_grad(loss_var, gvar);
}

double generator_update(LinearGenerator& gen, OptimizerState& state, const CriticNet& critic,
                        const Matrix& latent_batch, double lr) {
    double loss_value = 0.0;
    const std::vector<std::vector<double>> grads = {
        generator_gradient(gen, critic, latent_batch, &loss_value)};
    const std::vector<Matrix*> params_g = {&gen.g};
    if (state.kind == OptimizerState::Kind::adam)
        adam_step(state, params_g, grads, lr);
    else
        rmsprop_step(state, params_g, grads, lr);
    return loss_value;
}

namespace {

// Sequential minibatches over a reshuffled index permutation per epoch.
class Batcher {
  public:
    Batcher(const SampleSet& data, int batch, RngStream rng)
        : data_(data), batch_(batch), rng_(rng), order_(data.n) {
        std::iota(order_.begin(), order_.end(), 0L);
        reshuffle();
    }

    Matrix next() {
        Matrix out(batch_, data_.dim);
        for (int i = 0; i < batch_; ++i) {
            if (cursor_ >= data_.n) reshuffle();
            const long src = order_[cursor_++];
            const double* row = data_.samples.data() + static_cast<std::size_t>(src) * data_.dim;
            double* dst = out.data() + static_cast<std::size_t>(i) * data_.dim;
            for (int j = 0; j < data_.dim; ++j) dst[j] = row[j];
        }
        return out;
    }

  private:
    void reshuffle() {
        for (long i = data_.n - 1; i > 0; --i) {
            const long j = static_cast<long>(rng_.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order_[i], order_[j]);
        }
        cursor_ = 0;
    }

    const SampleSet& data_;
    int batch_;
    RngStream rng_;
    std::vector<long> order_;
    long cursor_ = 0;
};

Matrix generator_gram(const LinearGenerator& gen) {
    return symmetrized(gen.g * gen.g.transposed());
}

}  // namespace

TrainResult train(const TrainConfig& config, const CovarianceModel& truth, const SampleSet& data) {
    config.validate();
    if (data.dim != config.d || data.n != config.n)
        throw ConfigError("train: sample set does not match the config");
    if (truth.d != config.d) throw ConfigError("train: covariance does not match the config");

    RngStream root(config.seed, 0);
    Batcher batcher(data, config.batch, root.substream(10));
    RngStream latent_root = root.substream(11);
    RngStream interp_rng = root.substream(12);
    long latent_counter = 0;
    auto next_latents = [&] {
        return sample_latent(config.r, config.batch,
                             latent_root.substream(static_cast<std::uint64_t>(latent_counter++)));
    };

    std::vector<int> layer_sizes;
    layer_sizes.push_back(config.d);
    for (int h : config.critic_hidden) layer_sizes.push_back(h);
    layer_sizes.push_back(1);

    TrainResult result;
    result.critic = glorot_init(layer_sizes, root.substream(13));
    result.generator = glorot_init_generator(config.d, config.r, root.substream(14));

    const bool gp = config.algorithm == TrainConfig::Algorithm::gp;
    OptimizerState critic_opt = gp ? OptimizerState::adam(param_cptrs(result.critic), config.beta1, config.beta2)
                                   : OptimizerState::rmsprop(param_cptrs(result.critic), config.rmsprop_rho);
    const std::vector<const Matrix*> gen_param = {&result.generator.g};
    OptimizerState gen_opt = gp ? OptimizerState::adam(gen_param, config.beta1, config.beta2)
                                : OptimizerState::rmsprop(gen_param, config.rmsprop_rho);

    LrSchedule schedule = config.lr;
    if (schedule.epoch_size_iters == 0)
        schedule.epoch_size_iters = (config.n + config.batch - 1) / config.batch;

    const Matrix emp_gram = empirical_pca(data, config.r).generator_gram;

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    auto log_record = [&](long gen_iter, double critic_loss, double gen_loss, RunLog& log) {
        const Matrix gram = generator_gram(result.generator);
        RunRecord rec;
        rec.gen_iter = gen_iter;
        rec.wall_seconds = elapsed();
        rec.frob_to_truth = frobenius_distance(truth.k_y, gram);
        rec.frob_to_empirical_pca = frobenius_distance(gram, emp_gram);
        rec.critic_loss = critic_loss;
        rec.gen_loss = gen_loss;
        log.records.push_back(rec);
    };

    RunLog& log = result.log;
    for (long it = 0; it < config.max_gen_iters; ++it) {
        const double lr = lr_at(schedule, it);
        double critic_loss = 0.0;
        for (int s = 0; s < config.critic_steps_per_gen; ++s) {
            const Matrix real = batcher.next();
            const Matrix fake = generator_forward(result.generator, next_latents().samples);
            const CriticUpdateResult res =
                gp ? critic_update_gp(result.critic, critic_opt, config, real, fake, interp_rng, lr)
                   : critic_update_wc(result.critic, critic_opt, config, real, fake, lr);
            critic_loss = res.objective;
        }
        const double gen_loss =
            generator_update(result.generator, gen_opt, result.critic, next_latents().samples, lr);

        if (!std::isfinite(critic_loss) || !std::isfinite(gen_loss) || !result.generator.g.all_finite()) {
            log.aborted = true;
            char buf[128];
            std::snprintf(buf, sizeof(buf), "non-finite loss at gen_iter %ld (critic=%g, gen=%g)", it,
                          critic_loss, gen_loss);
            log.abort_reason = buf;
            log_record(it, critic_loss, gen_loss, log);
            break;
        }
        if (it % config.log_every == 0 || it + 1 == config.max_gen_iters)
            log_record(it, critic_loss, gen_loss, log);
    }
    return result;
}

namespace {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string runlog_to_csv(const RunLog& log) {
    std::string out = "gen_iter,wall_seconds,frob_to_truth,frob_to_empirical_pca,critic_loss,gen_loss\n";
    for (const RunRecord& r : log.records) {
        out += std::to_string(r.gen_iter);
        out += ',';
        out += format_double(r.wall_seconds);
        out += ',';
        out += format_double(r.frob_to_truth);
        out += ',';
        out += format_double(r.frob_to_empirical_pca);
        out += ',';
        out += format_double(r.critic_loss);
        out += ',';
        out += format_double(r.gen_loss);
        out += '\n';
    }
    return out;
}

RunLog runlog_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("run log CSV: empty");
    if (line != "gen_iter,wall_seconds,frob_to_truth,frob_to_empirical_pca,critic_loss,gen_loss")
        throw IoError("run log CSV: unexpected header: " + line);
    RunLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        RunRecord r;
        char* end = nullptr;
        const char* s = line.c_str();
        r.gen_iter = std::strtol(s, &end, 10);
        double* fields[5] = {&r.wall_seconds, &r.frob_to_truth, &r.frob_to_empirical_pca, &r.critic_loss,
                             &r.gen_loss};
        for (double* f : fields) {
            if (*end != ',') throw IoError("run log CSV: malformed row: " + line);
            s = end + 1;
            *f = std::strtod(s, &end);
        }
        log.records.push_back(r);
    }
    return log;
}

}  // namespace lab
