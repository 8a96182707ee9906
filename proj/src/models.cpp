#include "lab/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lab/errors.hpp"

namespace lab {

CriticNet glorot_init(const std::vector<int>& layer_sizes, RngStream rng) {
    if (layer_sizes.size() < 2) throw DomainError("glorot_init: need at least two layers");
    for (int s : layer_sizes)
        if (s < 1) throw DomainError("glorot_init: layer sizes must be positive");
    CriticNet net;
    net.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) {
                double x;
                do {
                    x = rng.uniform_range(-bound, bound);
                } while (x == -bound);  // keep strictly inside the open interval
                w(i, j) = x;
            }
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 1);
    }
    return net;
}

LinearGenerator glorot_init_generator(int d, int r, RngStream rng) {
    if (d < 1 || r < 1) throw DomainError("glorot_init_generator: dimensions must be positive");
    const double bound = std::sqrt(6.0 / (d + r));
    LinearGenerator gen;
    gen.g = Matrix(d, r);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) gen.g(i, j) = rng.uniform_range(-bound, bound);
    return gen;
}

Matrix generator_forward(const LinearGenerator& gen, const Matrix& latents) {
    if (latents.cols() != gen.r()) throw DimensionError("generator_forward: latent dimension mismatch");
    return latents * gen.g.transposed();
}

Matrix critic_forward(const CriticNet& net, const Matrix& y_batch) {
    if (y_batch.cols() != net.input_dim()) throw DimensionError("critic_forward: input dimension mismatch");
    Matrix h = y_batch;
    for (int l = 0; l < net.n_layers(); ++l) {
        Matrix z = h * net.weights[l].transposed();
        for (int i = 0; i < z.rows(); ++i)
            for (int j = 0; j < z.cols(); ++j) z(i, j) += net.biases[l](j, 0);
        if (l + 1 < net.n_layers())
            for (double* x = z.data(); x != z.data() + z.size(); ++x)
                if (*x < 0.0) *x = 0.0;
        h = std::move(z);
    }
    return h;
}

std::vector<Var> CriticVars::all() const {
    std::vector<Var> out;
    out.reserve(weights.size() + biases.size());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l]);
        out.push_back(biases[l]);
    }
    return out;
}

CriticVars record_critic_params(Tape& tape, const CriticNet& net, bool as_constants) {
    CriticVars vars;
    for (int l = 0; l < net.n_layers(); ++l) {
        if (as_constants) {
            vars.weights.push_back(tape.constant(net.weights[l]));
            vars.biases.push_back(tape.constant(net.biases[l]));
        } else {
            vars.weights.push_back(tape.input(net.weights[l]));
            vars.biases.push_back(tape.input(net.biases[l]));
        }
    }
    return vars;
}

Var critic_scores(Tape& tape, const CriticVars& params, Var y_batch) {
    Var h = y_batch;
    const int n_layers = static_cast<int>(params.weights.size());
    for (int l = 0; l < n_layers; ++l) {
        Var z = tape.bias_add(tape.matmul(h, tape.transpose(params.weights[l])), params.biases[l]);
        h = (l + 1 < n_layers) ? tape.relu(z) : z;
    }
    return h;
}

Var critic_forward(const CriticNet& net, const Matrix& y_batch, Tape& tape) {
    if (y_batch.cols() != net.input_dim()) throw DimensionError("critic_forward: input dimension mismatch");
    const CriticVars params = record_critic_params(tape, net, /*as_constants=*/true);
    return critic_scores(tape, params, tape.input(y_batch));
}

namespace {

nlohmann::json flat(const Matrix& m) {
    return nlohmann::json(m.values());
}

Matrix unflat(const nlohmann::json& j, int rows, int cols) {
    std::vector<double> data = j.get<std::vector<double>>();
    return Matrix(rows, cols, std::move(data));
}

}  // namespace

std::string checkpoint_to_json(const LinearGenerator& gen, const CriticNet& critic) {
    nlohmann::json j;
    j["generator"] = {{"d", gen.d()}, {"r", gen.r()}, {"g", flat(gen.g)}};
    j["critic"]["layer_sizes"] = critic.layer_sizes;
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (int l = 0; l < critic.n_layers(); ++l) {
        weights.push_back(flat(critic.weights[l]));
        biases.push_back(flat(critic.biases[l]));
    }
    j["critic"]["weights"] = std::move(weights);
    j["critic"]["biases"] = std::move(biases);
    return j.dump(2);
}

void checkpoint_from_json(const std::string& text, LinearGenerator& gen, CriticNet& critic) {
    nlohmann::json j = nlohmann::json::parse(text);
    const int d = j.at("generator").at("d").get<int>();
    const int r = j.at("generator").at("r").get<int>();
    gen.g = unflat(j.at("generator").at("g"), d, r);
    critic.layer_sizes = j.at("critic").at("layer_sizes").get<std::vector<int>>();
    critic.weights.clear();
    critic.biases.clear();
    for (std::size_t l = 0; l + 1 < critic.layer_sizes.size(); ++l) {
        const int fan_in = critic.layer_sizes[l];
        const int fan_out = critic.layer_sizes[l + 1];
        critic.weights.push_back(unflat(j.at("critic").at("weights").at(l), fan_out, fan_in));
        critic.biases.push_back(unflat(j.at("critic").at("biases").at(l), fan_out, 1));
    }
}

void write_checkpoint(const LinearGenerator& gen, const CriticNet& critic, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    const std::string text = checkpoint_to_json(gen, critic);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed: " + path);
}

void read_checkpoint(const std::string& path, LinearGenerator& gen, CriticNet& critic) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    checkpoint_from_json(buf.str(), gen, critic);
}

}  // namespace lab
