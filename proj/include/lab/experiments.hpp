#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lab/train.hpp"

namespace lab {

// One experiment description, parsed from a JSON spec file. Unused sections
// keep their defaults.
struct ExperimentSpec {
    enum class Mode { train, r1pca_verify, jsd_demo, w1_oracle, sweep };

    std::string name = "experiment";
    Mode mode = Mode::train;
    std::string out_dir = ".";
    TrainConfig train_config;

    struct SolverParams {
        int d = 8;
        int r = 3;
        long n_mc = 1000000;
        int max_iter = 30;
        double tol = 5e-3;
        std::uint64_t seed = 1;
    } solver;

    struct JsdParams {
        std::vector<int> dims = {2, 32};
        int n_generators = 50;
        std::uint64_t seed = 1;
    } jsd;

    struct W1Params {
        long n_mc = 1000000;
        int n_points = 512;
        int n_seeds = 10;
        std::uint64_t seed = 1;
    } w1;

    struct SweepAxes {
        std::vector<long> n;
        std::vector<int> n_h;
        std::vector<int> r;
        std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    } sweep;

    nlohmann::json resolved;  // the spec after overrides, for provenance
};

struct RunSummary {
    std::string name;
    std::string config_hash;
    int d = 0;
    int r = 0;
    int n_h = 0;
    long n = 0;
    std::uint64_t seed = 0;
    long gen_iters = 0;
    double wall_seconds = 0.0;
    double final_frob_to_truth = 0.0;
    double final_frob_to_empirical_pca = 0.0;
    double population_residual = 0.0;
    double empirical_residual = 0.0;
    double gap_population = 0.0;
    double gap_empirical = 0.0;
    bool aborted = false;
};

struct Report {
    std::vector<RunSummary> rows;
    nlohmann::json extra;       // mode-specific results
    nlohmann::json provenance;  // seeds, timestamps, artifact version
};

ExperimentSpec parse_spec(const nlohmann::json& j);
ExperimentSpec load_spec(const std::string& path, const std::vector<std::string>& overrides);

// Applies `key.path=value` to a JSON document; values parse as JSON when
// possible, otherwise as strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Executes the experiment, writing runlog CSVs, report.json and SVG plots
// into out_dir. Deterministic given the spec.
Report run_experiment(const ExperimentSpec& spec);

// Merge per-run reports into one table sorted by (n, n_h); all rows must
// share d and gaps are recomputed from the stored fields.
Report compare_report(const std::vector<Report>& reports);

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);
void write_report(const Report& report, const std::string& path);
Report read_report(const std::string& path);

void write_runlog_csv(const RunLog& log, const std::string& path);
RunLog read_runlog_csv(const std::string& path);

std::string render_report_table(const Report& report);

// Parallelism cap for sweep jobs; reads LAB_THREADS, defaults to the
// hardware concurrency.
int lab_thread_budget();

}  // namespace lab
