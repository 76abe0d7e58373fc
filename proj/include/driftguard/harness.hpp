#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "driftguard/data.hpp"
#include "driftguard/metrics.hpp"
#include "driftguard/optim.hpp"
#include "driftguard/strategies.hpp"

namespace dg {

enum class BenchmarkKind { permuted, split, synthetic };

BenchmarkKind benchmark_from_string(const std::string& s);
std::string to_string(BenchmarkKind b);

/// Everything one run needs; loadable from a commented JSON file and
/// overridable from the command line.
struct ExperimentConfig {
    BenchmarkKind benchmark = BenchmarkKind::permuted;

    // image benchmarks
    std::string data_dir;            // empty -> $DRIFTGUARD_DATA
    std::string train_images = "train-images-idx3-ubyte";
    std::string train_labels = "train-labels-idx1-ubyte";
    std::string test_images = "test-images-idx3-ubyte";
    std::string test_labels = "test-labels-idx1-ubyte";
    bool downsample = false;
    std::size_t train_subset = 0;    // 0 = all
    std::size_t test_subset = 0;
    std::size_t classes_per_task = 2; // split benchmark

    std::size_t n_tasks = 4;
    SyntheticSpec synthetic;         // synthetic benchmark shape

    std::vector<std::size_t> hidden = {400, 400, 400, 400};
    OptimKind optimizer = OptimKind::sgd;
    double lr = 1e-3;
    std::size_t epochs = 1;
    std::size_t batch_size = 64;

    StrategyConfig strategy;
    std::uint64_t seed = 1;
    std::string out_dir;             // empty -> no artifacts written
    std::size_t embedding_export_cap = 2000; // rows per task in the CSV export

    /// data_dir falling back to the environment; throws when neither is set
    /// and the benchmark needs files.
    std::string resolved_data_dir() const;
};

/// Parses a UTF-8 JSON config (// and /* */ comments allowed) and checks
/// that referenced dataset files exist.
ExperimentConfig load_config(const std::string& path);

/// Range/consistency checks; throws ConfigError.
void validate(const ExperimentConfig& cfg);

struct RunReport {
    ExperimentConfig config;
    RMatrix rmatrix;
    double accuracy = 0.0;
    double bwt = 0.0;
    double remembering = 0.0;
    double positive_bwt = 0.0;
    std::vector<double> task0_trajectory; // accuracy on the first task after each task
    std::vector<double> seconds_per_task;
    double total_seconds = 0.0;
    GemStats gem;
    bool has_gem_stats = false;
};

/// Builds the task stream, trains sequentially with the configured
/// strategy, fills the R matrix row by row, and (when out_dir is set)
/// writes rmatrix.csv, metrics.json, trajectory.csv, per-task embedding
/// CSVs, and the memory dump.
RunReport run_experiment(const ExperimentConfig& cfg);

/// Embeddings of (up to cap) test samples with labels and their 2D
/// principal-component projection, as CSV.
void export_embeddings(const Network& net, const TaskDataset& test, const std::string& path,
                       std::size_t cap = 2000);

/// Per-strategy seconds and metric table; ratios are relative to the naive
/// run when present, otherwise to the first report.
std::string timing_report(const std::vector<RunReport>& reports);

/// metrics.json payload for one report (also embedded in timing output).
std::string metrics_json(const RunReport& report);

} // namespace dg
