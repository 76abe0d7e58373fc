#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "driftguard/harness.hpp"
#include "driftguard/kernels.hpp"

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> strategy;
    std::optional<std::size_t> memory_per_task;
    std::optional<std::string> data;
    bool downsample = false;
};

void add_override_flags(CLI::App& cmd, Overrides& ov) {
    cmd.add_option("--seed", ov.seed, "Override the run seed");
    cmd.add_option("--out", ov.out, "Override the output directory");
    cmd.add_option("--strategy", ov.strategy, "Override the strategy kind");
    cmd.add_option("--memory-per-task", ov.memory_per_task, "Override the rehearsal budget");
    cmd.add_option("--data", ov.data, "Override the dataset directory");
    cmd.add_flag("--downsample", ov.downsample, "2x2-average-pool the images");
}

dg::ExperimentConfig load_with_overrides(const std::string& path, const Overrides& ov) {
    dg::ExperimentConfig cfg = dg::load_config(path);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.out) cfg.out_dir = *ov.out;
    if (ov.strategy) cfg.strategy.kind = dg::strategy_from_string(*ov.strategy);
    if (ov.memory_per_task) cfg.strategy.memory_per_task = *ov.memory_per_task;
    if (ov.data) cfg.data_dir = *ov.data;
    if (ov.downsample) cfg.downsample = true;
    return cfg;
}

void print_summary(const dg::RunReport& rep) {
    std::printf("strategy=%s benchmark=%s tasks=%zu seed=%llu kernels=%s\n",
                dg::to_string(rep.config.strategy.kind).c_str(),
                dg::to_string(rep.config.benchmark).c_str(), rep.rmatrix.n_tasks(),
                static_cast<unsigned long long>(rep.config.seed), dg::kernels::active().name);
    std::printf("accuracy=%.4f bwt=%+.4f remembering=%.4f positive_bwt=%.4f seconds=%.2f\n",
                rep.accuracy, rep.bwt, rep.remembering, rep.positive_bwt, rep.total_seconds);
    if (rep.has_gem_stats) {
        std::printf("gem: steps=%zu projected=%zu qp_failures=%zu\n", rep.gem.steps_total,
                    rep.gem.steps_projected, rep.gem.qp_failures);
    }
    if (!rep.config.out_dir.empty()) {
        std::printf("artifacts: %s\n", rep.config.out_dir.c_str());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual-learning benchmark runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> config_paths;
    std::vector<std::size_t> memory_sizes = {10, 50, 100, 200, 300, 500};
    Overrides ov;

    CLI::App* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("config,--config", config_path, "Config file (JSON, comments allowed)")
        ->required();
    add_override_flags(*run, ov);

    CLI::App* compare = app.add_subcommand("compare", "Run several configs and tabulate them");
    compare->add_option("configs,--config", config_paths, "Config files")->required()->expected(-2);
    add_override_flags(*compare, ov);

    CLI::App* sweep = app.add_subcommand("sweep", "Repeat one config across rehearsal budgets");
    sweep->add_option("config,--config", config_path, "Config file")->required();
    sweep->add_option("--memory", memory_sizes, "Comma-separated memory sizes")->delimiter(',');
    add_override_flags(*sweep, ov);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const dg::RunReport rep = dg::run_experiment(load_with_overrides(config_path, ov));
            print_summary(rep);
        } else if (compare->parsed()) {
            std::vector<dg::RunReport> reports;
            for (const std::string& path : config_paths) {
                dg::ExperimentConfig cfg = load_with_overrides(path, ov);
                if (ov.out) { // keep per-run artifacts apart under the shared root
                    cfg.out_dir = (std::filesystem::path(*ov.out) /
                                   dg::to_string(cfg.strategy.kind)).string();
                }
                std::fprintf(stderr, "running %s (%s)...\n", path.c_str(),
                             dg::to_string(cfg.strategy.kind).c_str());
                reports.push_back(dg::run_experiment(cfg));
            }
            std::cout << dg::timing_report(reports);
        } else if (sweep->parsed()) {
            std::printf("memory_per_task,accuracy,bwt,remembering,positive_bwt,seconds\n");
            std::ostringstream rows;
            rows << "memory_per_task,accuracy,bwt,remembering,positive_bwt,seconds\n";
            for (std::size_t m : memory_sizes) {
                dg::ExperimentConfig cfg = load_with_overrides(config_path, ov);
                cfg.strategy.memory_per_task = m;
                if (!cfg.out_dir.empty()) {
                    cfg.out_dir = (std::filesystem::path(cfg.out_dir) /
                                   ("memory_" + std::to_string(m))).string();
                }
                const dg::RunReport rep = dg::run_experiment(cfg);
                std::printf("%zu,%.6f,%.6f,%.6f,%.6f,%.2f\n", m, rep.accuracy, rep.bwt,
                            rep.remembering, rep.positive_bwt, rep.total_seconds);
                rows << m << ',' << rep.accuracy << ',' << rep.bwt << ',' << rep.remembering << ','
                     << rep.positive_bwt << ',' << rep.total_seconds << '\n';
            }
            if (ov.out) {
                std::filesystem::create_directories(*ov.out);
                std::ofstream f(std::filesystem::path(*ov.out) / "sweep.csv");
                f << rows.str();
            }
        }
    } catch (const dg::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
