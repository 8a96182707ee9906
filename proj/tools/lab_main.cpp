#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lab/errors.hpp"
#include "lab/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Linear-generator WGAN vs PCA experiment lab"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string out_dir;
    std::int64_t seed = -1;
    std::vector<std::string> overrides;
    CLI::App* run = app.add_subcommand("run", "Execute an experiment spec file");
    run->add_option("spec", spec_path, "JSON experiment spec")->required();
    run->add_option("--out", out_dir, "Output directory (overrides the spec)");
    run->add_option("--seed", seed, "Seed override for every mode section");
    run->add_option("--override", overrides, "Dot-path overrides, e.g. train.n=100000");

    std::vector<std::string> report_dirs;
    CLI::App* rep = app.add_subcommand("report", "Merge and print reports from run directories");
    rep->add_option("dirs", report_dirs, "Directories containing report.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::vector<std::string> all = overrides;
            if (!out_dir.empty()) all.push_back("out_dir=" + out_dir);
            if (seed >= 0) {
                const std::string s = std::to_string(seed);
                all.push_back("train.seed=" + s);
                all.push_back("solver.seed=" + s);
                all.push_back("jsd.seed=" + s);
                all.push_back("w1.seed=" + s);
            }
            const lab::ExperimentSpec spec = lab::load_spec(spec_path, all);
            const lab::Report report = lab::run_experiment(spec);
            std::cout << lab::render_report_table(report);
            if (!report.extra.is_null()) std::cout << report.extra.dump(2) << "\n";
            for (const lab::RunSummary& row : report.rows) {
                if (row.aborted) {
                    std::cerr << "run aborted: " << row.name << "\n";
                    return 3;
                }
            }
            return 0;
        }
        if (rep->parsed()) {
            std::vector<lab::Report> reports;
            for (const std::string& dir : report_dirs)
                reports.push_back(lab::read_report(dir + "/report.json"));
            const lab::Report merged = lab::compare_report(reports);
            std::cout << lab::render_report_table(merged);
            return 0;
        }
    } catch (const lab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
