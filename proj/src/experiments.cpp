#include "lab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "lab/divergences.hpp"
#include "lab/errors.hpp"
#include "lab/r1pca.hpp"
#include "lab/svg.hpp"

namespace lab {

namespace {

std::string fnv1a_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

constexpr const char* kArtifactVersion = "1.0.0";

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("d")) c.d = j.at("d").get<int>();
    if (j.contains("r")) c.r = j.at("r").get<int>();
    if (j.contains("n")) c.n = j.at("n").get<long>();
    if (j.contains("batch")) c.batch = j.at("batch").get<int>();
    if (j.contains("algorithm")) {
        const std::string a = j.at("algorithm").get<std::string>();
        if (a == "wc")
            c.algorithm = TrainConfig::Algorithm::wc;
        else if (a == "gp")
            c.algorithm = TrainConfig::Algorithm::gp;
        else
            throw ConfigError("unknown algorithm: " + a);
    }
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("clip_c")) c.clip_c = j.at("clip_c").get<double>();
    if (j.contains("critic_steps_per_gen")) c.critic_steps_per_gen = j.at("critic_steps_per_gen").get<int>();
    if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
    if (j.contains("rmsprop_rho")) c.rmsprop_rho = j.at("rmsprop_rho").get<double>();
    if (j.contains("lr")) {
        const nlohmann::json& lr = j.at("lr");
        if (lr.contains("initial")) c.lr.initial_lr = lr.at("initial").get<double>();
        if (lr.contains("decay_factor")) c.lr.decay_factor = lr.at("decay_factor").get<double>();
        if (lr.contains("decay_every_epochs")) c.lr.decay_every_epochs = lr.at("decay_every_epochs").get<long>();
        if (lr.contains("epoch_size_iters")) c.lr.epoch_size_iters = lr.at("epoch_size_iters").get<long>();
    }
    if (j.contains("max_gen_iters")) c.max_gen_iters = j.at("max_gen_iters").get<long>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("critic_hidden")) c.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
    if (j.contains("log_every")) c.log_every = j.at("log_every").get<long>();
    if (j.contains("gradnorm_eps")) c.gradnorm_eps = j.at("gradnorm_eps").get<double>();
    return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["d"] = c.d;
    j["r"] = c.r;
    j["n"] = c.n;
    j["batch"] = c.batch;
    j["algorithm"] = c.algorithm == TrainConfig::Algorithm::gp ? "gp" : "wc";
    j["lambda"] = c.lambda;
    j["clip_c"] = c.clip_c;
    j["critic_steps_per_gen"] = c.critic_steps_per_gen;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["rmsprop_rho"] = c.rmsprop_rho;
    j["lr"] = {{"initial", c.lr.initial_lr},
               {"decay_factor", c.lr.decay_factor},
               {"decay_every_epochs", c.lr.decay_every_epochs},
               {"epoch_size_iters", c.lr.epoch_size_iters}};
    j["max_gen_iters"] = c.max_gen_iters;
    j["seed"] = c.seed;
    j["critic_hidden"] = c.critic_hidden;
    j["log_every"] = c.log_every;
    j["gradnorm_eps"] = c.gradnorm_eps;
    return j;
}

bool filesystem_safe(const std::string& name) {
    if (name.empty() || name.size() > 128) return false;
    for (char c : name)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
    return true;
}

// Streams reserved per experiment: 100 ground truth, 101 data sampling.
constexpr std::uint64_t kCovStream = 100;
constexpr std::uint64_t kDataStream = 101;

struct TrainRunOutput {
    RunSummary summary;
    RunLog log;
    LinearGenerator generator;
    CriticNet critic;
};

TrainRunOutput execute_train_run(const TrainConfig& config, const std::string& run_name,
                                 const CovarianceModel& cov) {
    const SampleSet data = sample_gaussian(cov, config.n, RngStream(config.seed, kDataStream));
    const TrainResult result = train(config, cov, data);

    TrainRunOutput out;
    out.log = result.log;
    out.generator = result.generator;
    out.critic = result.critic;

    RunSummary& s = out.summary;
    s.name = run_name;
    s.config_hash = fnv1a_hash(train_config_to_json(config).dump());
    s.d = config.d;
    s.r = config.r;
    s.n_h = config.critic_hidden.empty() ? 0 : config.critic_hidden.front();
    s.n = config.n;
    s.seed = config.seed;
    s.aborted = result.log.aborted;
    const PcaSolution pop = population_pca(cov, config.r);
    const PcaSolution emp = empirical_pca(data, config.r);
    s.population_residual = pop.residual;
    s.empirical_residual = frobenius_distance(cov.k_y, emp.generator_gram);
    if (!result.log.records.empty()) {
        const RunRecord& last = result.log.records.back();
        s.gen_iters = last.gen_iter + 1;
        s.wall_seconds = last.wall_seconds;
        s.final_frob_to_truth = last.frob_to_truth;
        s.final_frob_to_empirical_pca = last.frob_to_empirical_pca;
    }
    s.gap_population = s.final_frob_to_truth - s.population_residual;
    s.gap_empirical = s.final_frob_to_truth - s.empirical_residual;
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed: " + path);
}

nlohmann::json summary_to_json(const RunSummary& s) {
    return nlohmann::json{{"name", s.name},
                          {"config_hash", s.config_hash},
                          {"d", s.d},
                          {"r", s.r},
                          {"n_h", s.n_h},
                          {"n", s.n},
                          {"seed", s.seed},
                          {"gen_iters", s.gen_iters},
                          {"wall_seconds", s.wall_seconds},
                          {"final_frob_to_truth", s.final_frob_to_truth},
                          {"final_frob_to_empirical_pca", s.final_frob_to_empirical_pca},
                          {"population_residual", s.population_residual},
                          {"empirical_residual", s.empirical_residual},
                          {"gap_population", s.gap_population},
                          {"gap_empirical", s.gap_empirical},
                          {"aborted", s.aborted}};
}

RunSummary summary_from_json(const nlohmann::json& j) {
    RunSummary s;
    s.name = j.at("name").get<std::string>();
    s.config_hash = j.at("config_hash").get<std::string>();
    s.d = j.at("d").get<int>();
    s.r = j.at("r").get<int>();
    s.n_h = j.at("n_h").get<int>();
    s.n = j.at("n").get<long>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.gen_iters = j.at("gen_iters").get<long>();
    s.wall_seconds = j.at("wall_seconds").get<double>();
    s.final_frob_to_truth = j.at("final_frob_to_truth").get<double>();
    s.final_frob_to_empirical_pca = j.at("final_frob_to_empirical_pca").get<double>();
    s.population_residual = j.at("population_residual").get<double>();
    s.empirical_residual = j.at("empirical_residual").get<double>();
    s.gap_population = j.at("gap_population").get<double>();
    s.gap_empirical = j.at("gap_empirical").get<double>();
    s.aborted = j.at("aborted").get<bool>();
    return s;
}

nlohmann::json base_provenance(const ExperimentSpec& spec) {
    nlohmann::json p;
    p["artifact_version"] = kArtifactVersion;
    p["timestamp"] = iso_timestamp();
    p["name"] = spec.name;
    p["spec"] = spec.resolved;
    return p;
}

void plot_training_curves(const ExperimentSpec& spec, const RunLog& log, const RunSummary& summary,
                          const std::string& path) {
    SvgSeries to_truth{"frob_to_truth", {}, {}};
    SvgSeries to_emp{"frob_to_empirical_pca", {}, {}};
    SvgSeries baseline{"population_pca_residual", {}, {}};
    for (const RunRecord& r : log.records) {
        to_truth.x.push_back(static_cast<double>(r.gen_iter));
        to_truth.y.push_back(r.frob_to_truth);
        to_emp.x.push_back(static_cast<double>(r.gen_iter));
        to_emp.y.push_back(r.frob_to_empirical_pca);
        baseline.x.push_back(static_cast<double>(r.gen_iter));
        baseline.y.push_back(summary.population_residual);
    }
    SvgAxes axes;
    axes.title = spec.name;
    axes.x_label = "generator iteration";
    axes.y_label = "Frobenius distance";
    emit_svg_plot({to_truth, to_emp, baseline}, path, axes);
}

Report run_train_mode(const ExperimentSpec& spec) {
    const CovarianceModel cov =
        generate_covariance(spec.train_config.d, RngStream(spec.train_config.seed, kCovStream));
    const TrainRunOutput out = execute_train_run(spec.train_config, spec.name, cov);

    const std::filesystem::path dir(spec.out_dir);
    write_text((dir / ("runlog_" + spec.name + ".csv")).string(), runlog_to_csv(out.log));
    write_checkpoint(out.generator, out.critic, (dir / ("checkpoint_" + spec.name + ".json")).string());
    plot_training_curves(spec, out.log, out.summary, (dir / ("plot_" + spec.name + ".svg")).string());

    Report report;
    report.rows.push_back(out.summary);
    report.provenance = base_provenance(spec);
    write_report(report, (dir / "report.json").string());
    return report;
}

Report run_r1pca_verify(const ExperimentSpec& spec) {
    const ExperimentSpec::SolverParams& sp = spec.solver;
    const CovarianceModel cov = generate_covariance(sp.d, RngStream(sp.seed, kCovStream));
    const PcaSolution pop = population_pca(cov, sp.r);

    Matrix v_r(sp.d, sp.r);
    for (int k = 0; k < sp.r; ++k)
        for (int i = 0; i < sp.d; ++i) v_r(i, k) = cov.eig.eigenvectors(i, k);
    const SubspaceBasis truth_basis{v_r};

    const SubspaceBasis solved =
        solve_key_condition(cov, sp.r, sp.n_mc, sp.max_iter, sp.tol, RngStream(sp.seed, 200));
    const double proj_dist = projector_distance(solved, truth_basis);
    const Matrix gram = generator_from_subspace(cov, solved);
    const double gram_dist = frobenius_distance(gram, pop.generator_gram);

    const KeyConditionReport kc = estimate_m_matrix(cov, truth_basis, sp.n_mc, RngStream(sp.seed, 201));

    const std::filesystem::path dir(spec.out_dir);
    write_text((dir / ("key_condition_" + spec.name + ".json")).string(), key_condition_report_to_json(kc));

    Report report;
    report.provenance = base_provenance(spec);
    report.extra = {{"mode", "r1pca-verify"},
                    {"d", sp.d},
                    {"r", sp.r},
                    {"n_mc", sp.n_mc},
                    {"projector_distance", proj_dist},
                    {"gram_distance_to_population_pca", gram_dist},
                    {"population_residual", pop.residual},
                    {"rank_tie", pop.rank_tie},
                    {"cross_term_max", kc.cross_term_max},
                    {"ordering_ok", kc.ordering_ok},
                    {"std_err", kc.std_err}};
    write_report(report, (dir / "report.json").string());
    return report;
}

Report run_jsd_demo(const ExperimentSpec& spec) {
    const ExperimentSpec::JsdParams& jp = spec.jsd;
    RngStream rng(jp.seed, 300);
    nlohmann::json cases = nlohmann::json::array();
    bool all_exact = true;
    const double log2 = std::log(2.0);
    for (int d : jp.dims) {
        const CovarianceModel cov = generate_covariance(d, rng.substream(d));
        const GaussianDist p = GaussianDist::from_cov(cov.k_y);
        RngStream gen_rng = rng.substream(10000 + d);
        for (int t = 0; t < jp.n_generators; ++t) {
            const int r = d == 2 ? 1 : 1 + static_cast<int>(gen_rng.next_u64() % (d - 1));
            Matrix g(d, r);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < r; ++j) g(i, j) = gen_rng.normal();
            const GaussianDist q = GaussianDist::from_cov(symmetrized(g * g.transposed()));
            const JsdEstimate est = jsd_gaussian(p, q, 1000, RngStream(jp.seed, 400 + t));
            const bool exact = est.analytic && est.value == log2;
            all_exact = all_exact && exact;
            cases.push_back({{"d", d}, {"r", r}, {"value", est.value}, {"analytic", est.analytic}});
        }
    }
    Report report;
    report.provenance = base_provenance(spec);
    report.extra = {{"mode", "jsd-demo"}, {"all_exact_log2", all_exact}, {"cases", cases}};
    write_report(report, (std::filesystem::path(spec.out_dir) / "report.json").string());
    return report;
}

Report run_w1_oracle(const ExperimentSpec& spec) {
    const ExperimentSpec::W1Params& wp = spec.w1;
    const CovarianceModel cov = CovarianceModel::from_matrix(Matrix{{0.8, 0.0}, {0.0, 0.6}});
    const SubspaceBasis u{Matrix{{1.0}, {0.0}}};

    const CouplingCost proj = projection_coupling_cost(cov, u, wp.n_mc, RngStream(wp.seed, 500));

    std::vector<double> exact_costs;
    for (int s = 0; s < wp.n_seeds; ++s) {
        const SampleSet a = sample_gaussian(cov, wp.n_points, RngStream(wp.seed, 600 + 2 * s));
        SampleSet b = sample_gaussian(cov, wp.n_points, RngStream(wp.seed, 601 + 2 * s));
        // push the independent draw through the projection coupling's map
        for (long i = 0; i < b.n; ++i) {
            b.samples(static_cast<int>(i), 1) = 0.0;  // U U^T for U = e1 zeroes the second axis
        }
        exact_costs.push_back(empirical_w1_exact(a, b).cost);
    }
    double mean = 0.0;
    for (double c : exact_costs) mean += c;
    mean /= exact_costs.size();
    double var = 0.0;
    for (double c : exact_costs) var += (c - mean) * (c - mean);
    var /= std::max<std::size_t>(1, exact_costs.size() - 1);
    const double spread = std::sqrt(var);

    Report report;
    report.provenance = base_provenance(spec);
    report.extra = {{"mode", "w1-oracle"},
                    {"projection_cost", proj.cost},
                    {"projection_std_err", proj.std_err},
                    {"exact_costs", exact_costs},
                    {"exact_mean", mean},
                    {"exact_spread", spread}};
    write_report(report, (std::filesystem::path(spec.out_dir) / "report.json").string());
    return report;
}

Report run_sweep(const ExperimentSpec& spec) {
    const TrainConfig& base = spec.train_config;
    const std::vector<long> ns = spec.sweep.n.empty() ? std::vector<long>{base.n} : spec.sweep.n;
    const std::vector<int> nhs =
        spec.sweep.n_h.empty() ? std::vector<int>{base.critic_hidden.front()} : spec.sweep.n_h;
    const std::vector<int> rs = spec.sweep.r.empty() ? std::vector<int>{base.r} : spec.sweep.r;
    if (spec.sweep.seeds.empty()) throw ConfigError("sweep: seeds axis must be non-empty");

    struct Job {
        TrainConfig config;
        std::string run_name;
    };
    std::vector<Job> jobs;
    for (long n : ns)
        for (int n_h : nhs)
            for (int r : rs)
                for (std::uint64_t seed : spec.sweep.seeds) {
                    TrainConfig c = base;
                    c.n = n;
                    c.r = r;
                    c.critic_hidden.assign(base.critic_hidden.size(), n_h);
                    c.seed = seed;
                    char buf[160];
                    std::snprintf(buf, sizeof(buf), "%s_n%ld_h%d_r%d_s%llu", spec.name.c_str(), n, n_h, r,
                                  static_cast<unsigned long long>(seed));
                    jobs.push_back(Job{c, buf});
                }

    // same ground truth across the whole sweep so gaps are comparable
    const CovarianceModel cov = generate_covariance(base.d, RngStream(base.seed, kCovStream));
    const std::filesystem::path dir(spec.out_dir);

    std::vector<TrainRunOutput> outputs(jobs.size());
    std::atomic<std::size_t> next{0};
    const int n_threads = std::min<int>(lab_thread_budget(), static_cast<int>(jobs.size()));
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            outputs[i] = execute_train_run(jobs[i].config, jobs[i].run_name, cov);
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    Report report;
    report.provenance = base_provenance(spec);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        write_text((dir / ("runlog_" + jobs[i].run_name + ".csv")).string(), runlog_to_csv(outputs[i].log));
        report.rows.push_back(outputs[i].summary);
    }

    // gap-vs-n chart: one series per (n_h, r), median over seeds
    std::vector<SvgSeries> series;
    for (int n_h : nhs)
        for (int r : rs) {
            SvgSeries s;
            char label[64];
            std::snprintf(label, sizeof(label), "n_h=%d r=%d", n_h, r);
            s.label = label;
            for (long n : ns) {
                std::vector<double> gaps;
                for (const RunSummary& row : report.rows)
                    if (row.n == n && row.n_h == n_h && row.r == r) gaps.push_back(row.gap_empirical);
                if (gaps.empty()) continue;
                std::sort(gaps.begin(), gaps.end());
                const double median = gaps.size() % 2 == 1
                                          ? gaps[gaps.size() / 2]
                                          : 0.5 * (gaps[gaps.size() / 2 - 1] + gaps[gaps.size() / 2]);
                s.x.push_back(static_cast<double>(n));
                s.y.push_back(median);
            }
            if (!s.x.empty()) series.push_back(std::move(s));
        }
    if (!series.empty()) {
        SvgAxes axes;
        axes.title = spec.name + " gap vs n";
        axes.x_label = "sample size n";
        axes.y_label = "median gap to empirical r-PCA";
        axes.log_x = true;
        emit_svg_plot(series, (dir / ("plot_" + spec.name + ".svg")).string(), axes);
    }
    write_report(report, (dir / "report.json").string());
    return report;
}

}  // namespace

ExperimentSpec parse_spec(const nlohmann::json& j) {
    ExperimentSpec spec;
    spec.resolved = j;
    if (j.contains("name")) spec.name = j.at("name").get<std::string>();
    if (!filesystem_safe(spec.name)) throw ConfigError("spec name is not filesystem-safe: " + spec.name);
    if (j.contains("out_dir")) spec.out_dir = j.at("out_dir").get<std::string>();
    const std::string mode = j.contains("mode") ? j.at("mode").get<std::string>() : "train";
    if (mode == "train")
        spec.mode = ExperimentSpec::Mode::train;
    else if (mode == "r1pca-verify")
        spec.mode = ExperimentSpec::Mode::r1pca_verify;
    else if (mode == "jsd-demo")
        spec.mode = ExperimentSpec::Mode::jsd_demo;
    else if (mode == "w1-oracle")
        spec.mode = ExperimentSpec::Mode::w1_oracle;
    else if (mode == "sweep")
        spec.mode = ExperimentSpec::Mode::sweep;
    else
        throw ConfigError("unknown mode: " + mode);

    if (j.contains("train")) spec.train_config = train_config_from_json(j.at("train"));
    if (j.contains("solver")) {
        const nlohmann::json& s = j.at("solver");
        if (s.contains("d")) spec.solver.d = s.at("d").get<int>();
        if (s.contains("r")) spec.solver.r = s.at("r").get<int>();
        if (s.contains("n_mc")) spec.solver.n_mc = s.at("n_mc").get<long>();
        if (s.contains("max_iter")) spec.solver.max_iter = s.at("max_iter").get<int>();
        if (s.contains("tol")) spec.solver.tol = s.at("tol").get<double>();
        if (s.contains("seed")) spec.solver.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("jsd")) {
        const nlohmann::json& s = j.at("jsd");
        if (s.contains("dims")) spec.jsd.dims = s.at("dims").get<std::vector<int>>();
        if (s.contains("n_generators")) spec.jsd.n_generators = s.at("n_generators").get<int>();
        if (s.contains("seed")) spec.jsd.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("w1")) {
        const nlohmann::json& s = j.at("w1");
        if (s.contains("n_mc")) spec.w1.n_mc = s.at("n_mc").get<long>();
        if (s.contains("n_points")) spec.w1.n_points = s.at("n_points").get<int>();
        if (s.contains("n_seeds")) spec.w1.n_seeds = s.at("n_seeds").get<int>();
        if (s.contains("seed")) spec.w1.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("sweep")) {
        const nlohmann::json& s = j.at("sweep");
        if (s.contains("n")) spec.sweep.n = s.at("n").get<std::vector<long>>();
        if (s.contains("n_h")) spec.sweep.n_h = s.at("n_h").get<std::vector<int>>();
        if (s.contains("r")) spec.sweep.r = s.at("r").get<std::vector<int>>();
        if (s.contains("seeds")) spec.sweep.seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
    }
    if (spec.mode == ExperimentSpec::Mode::sweep && spec.sweep.n.empty() && spec.sweep.n_h.empty() &&
        spec.sweep.r.empty())
        throw ConfigError("sweep mode needs at least one non-empty axis");
    return spec;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value;  // bare strings are fine
    }

    nlohmann::json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override has an empty path segment: " + assignment);
        if (dot == std::string::npos) {
            (*node)[key] = parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

ExperimentSpec load_spec(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open spec file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("spec file is not valid JSON: ") + e.what());
    }
    for (const std::string& o : overrides) apply_override(j, o);
    return parse_spec(j);
}

Report run_experiment(const ExperimentSpec& spec) {
    std::filesystem::create_directories(spec.out_dir);
    switch (spec.mode) {
        case ExperimentSpec::Mode::train: return run_train_mode(spec);
        case ExperimentSpec::Mode::r1pca_verify: return run_r1pca_verify(spec);
        case ExperimentSpec::Mode::jsd_demo: return run_jsd_demo(spec);
        case ExperimentSpec::Mode::w1_oracle: return run_w1_oracle(spec);
        case ExperimentSpec::Mode::sweep: return run_sweep(spec);
    }
    throw ConfigError("unreachable mode");
}

Report compare_report(const std::vector<Report>& reports) {
    Report merged;
    merged.provenance = nlohmann::json::array();
    for (const Report& r : reports) {
        merged.provenance.push_back(r.provenance);
        for (const RunSummary& row : r.rows) merged.rows.push_back(row);
    }
    if (merged.rows.empty()) return merged;
    const int d = merged.rows.front().d;
    for (RunSummary& row : merged.rows) {
        if (row.d != d) throw ConfigError("compare_report: runs do not share d");
        row.gap_population = row.final_frob_to_truth - row.population_residual;
        row.gap_empirical = row.final_frob_to_truth - row.empirical_residual;
    }
    std::stable_sort(merged.rows.begin(), merged.rows.end(), [](const RunSummary& a, const RunSummary& b) {
        if (a.n != b.n) return a.n < b.n;
        return a.n_h < b.n_h;
    });
    return merged;
}

nlohmann::json report_to_json(const Report& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const RunSummary& s : report.rows) rows.push_back(summary_to_json(s));
    nlohmann::json j;
    j["rows"] = std::move(rows);
    j["extra"] = report.extra;
    j["provenance"] = report.provenance;
    return j;
}

Report report_from_json(const nlohmann::json& j) {
    Report r;
    for (const nlohmann::json& row : j.at("rows")) r.rows.push_back(summary_from_json(row));
    if (j.contains("extra")) r.extra = j.at("extra");
    if (j.contains("provenance")) r.provenance = j.at("provenance");
    return r;
}

void write_report(const Report& report, const std::string& path) {
    write_text(path, report_to_json(report).dump(2) + "\n");
}

Report read_report(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open report: " + path);
    nlohmann::json j;
    f >> j;
    return report_from_json(j);
}

void write_runlog_csv(const RunLog& log, const std::string& path) {
    write_text(path, runlog_to_csv(log));
}

RunLog read_runlog_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open run log: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return runlog_from_csv(buf.str());
}

std::string render_report_table(const Report& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %8s %5s %5s %6s %12s %12s %12s %12s\n", "name", "n", "n_h", "r",
                  "seed", "final_frob", "pop_resid", "emp_resid", "gap_emp");
    out += line;
    for (const RunSummary& s : report.rows) {
        std::snprintf(line, sizeof(line), "%-28s %8ld %5d %5d %6llu %12.6f %12.6f %12.6f %12.6f%s\n",
                      s.name.c_str(), s.n, s.n_h, s.r, static_cast<unsigned long long>(s.seed),
                      s.final_frob_to_truth, s.population_residual, s.empirical_residual, s.gap_empirical,
                      s.aborted ? "  [ABORTED]" : "");
        out += line;
    }
    return out;
}

int lab_thread_budget() {
    if (const char* env = std::getenv("LAB_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace lab
