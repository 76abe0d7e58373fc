#include "driftguard/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "driftguard/pca.hpp"

namespace dg {

namespace fs = std::filesystem;
using nlohmann::json;

BenchmarkKind benchmark_from_string(const std::string& s) {
    if (s == "permuted") return BenchmarkKind::permuted;
    if (s == "split") return BenchmarkKind::split;
    if (s == "synthetic") return BenchmarkKind::synthetic;
    throw ConfigError("unknown benchmark '" + s + "'");
}

std::string to_string(BenchmarkKind b) {
    switch (b) {
        case BenchmarkKind::permuted: return "permuted";
        case BenchmarkKind::split: return "split";
        case BenchmarkKind::synthetic: return "synthetic";
    }
    throw ConfigError("invalid benchmark kind");
}

namespace {

OptimKind optim_from_string(const std::string& s) {
    if (s == "sgd") return OptimKind::sgd;
    if (s == "adam") return OptimKind::adam;
    throw ConfigError("unknown optimizer '" + s + "'");
}

std::string to_string(OptimKind k) { return k == OptimKind::sgd ? "sgd" : "adam"; }

HeadMode head_mode_from_string(const std::string& s) {
    if (s == "shared") return HeadMode::shared;
    if (s == "per_task") return HeadMode::per_task;
    throw ConfigError("unknown head mode '" + s + "'");
}

void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["benchmark"] = to_string(cfg.benchmark);
    j["data"] = {{"dir", cfg.data_dir},
                 {"train_images", cfg.train_images},
                 {"train_labels", cfg.train_labels},
                 {"test_images", cfg.test_images},
                 {"test_labels", cfg.test_labels},
                 {"downsample", cfg.downsample},
                 {"train_subset", cfg.train_subset},
                 {"test_subset", cfg.test_subset},
                 {"classes_per_task", cfg.classes_per_task}};
    j["n_tasks"] = cfg.n_tasks;
    j["synthetic"] = {{"dim", cfg.synthetic.dim},
                      {"classes", cfg.synthetic.classes},
                      {"train_per_class", cfg.synthetic.train_per_class},
                      {"test_per_class", cfg.synthetic.test_per_class},
                      {"separation", cfg.synthetic.separation},
                      {"heads", cfg.synthetic.head_mode == HeadMode::shared ? "shared" : "per_task"}};
    j["model"] = {{"hidden", cfg.hidden}};
    j["optimizer"] = {{"kind", to_string(cfg.optimizer)}, {"lr", cfg.lr}};
    j["training"] = {{"epochs", cfg.epochs}, {"batch_size", cfg.batch_size}};
    j["strategy"] = {{"kind", to_string(cfg.strategy.kind)},
                     {"lambda", cfg.strategy.lambda},
                     {"gamma", cfg.strategy.gamma},
                     {"c", cfg.strategy.c},
                     {"xi", cfg.strategy.xi},
                     {"memory_per_task", cfg.strategy.memory_per_task},
                     {"reg_batch", cfg.strategy.reg_batch},
                     {"weighting", to_string(cfg.strategy.weighting)}};
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["embedding_export_cap"] = cfg.embedding_export_cap;
    return j;
}

} // namespace

std::string ExperimentConfig::resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("DRIFTGUARD_DATA"); env && *env) return env;
    throw ConfigError("no dataset directory: set data.dir in the config or DRIFTGUARD_DATA");
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_config: cannot open " + path);

    ExperimentConfig cfg;
    try {
        const json j = json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
        expect_keys(j,
                    {"benchmark", "data", "n_tasks", "synthetic", "model", "optimizer", "training",
                     "strategy", "seed", "out_dir", "embedding_export_cap"},
                    "config root");

        if (j.contains("benchmark")) cfg.benchmark = benchmark_from_string(j.at("benchmark"));
        cfg.n_tasks = get_or<std::size_t>(j, "n_tasks", cfg.n_tasks);
        cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
        cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);
        cfg.embedding_export_cap =
            get_or<std::size_t>(j, "embedding_export_cap", cfg.embedding_export_cap);

        if (j.contains("data")) {
            const json& d = j.at("data");
            expect_keys(d,
                        {"dir", "train_images", "train_labels", "test_images", "test_labels",
                         "downsample", "train_subset", "test_subset", "classes_per_task"},
                        "data");
            cfg.data_dir = get_or<std::string>(d, "dir", cfg.data_dir);
            cfg.train_images = get_or<std::string>(d, "train_images", cfg.train_images);
            cfg.train_labels = get_or<std::string>(d, "train_labels", cfg.train_labels);
            cfg.test_images = get_or<std::string>(d, "test_images", cfg.test_images);
            cfg.test_labels = get_or<std::string>(d, "test_labels", cfg.test_labels);
            cfg.downsample = get_or<bool>(d, "downsample", cfg.downsample);
            cfg.train_subset = get_or<std::size_t>(d, "train_subset", cfg.train_subset);
            cfg.test_subset = get_or<std::size_t>(d, "test_subset", cfg.test_subset);
            cfg.classes_per_task = get_or<std::size_t>(d, "classes_per_task", cfg.classes_per_task);
        }

        if (j.contains("synthetic")) {
            const json& s = j.at("synthetic");
            expect_keys(s, {"dim", "classes", "train_per_class", "test_per_class", "separation", "heads"},
                        "synthetic");
            cfg.synthetic.dim = get_or<std::size_t>(s, "dim", cfg.synthetic.dim);
            cfg.synthetic.classes = get_or<std::size_t>(s, "classes", cfg.synthetic.classes);
            cfg.synthetic.train_per_class =
                get_or<std::size_t>(s, "train_per_class", cfg.synthetic.train_per_class);
            cfg.synthetic.test_per_class =
                get_or<std::size_t>(s, "test_per_class", cfg.synthetic.test_per_class);
            cfg.synthetic.separation = get_or<double>(s, "separation", cfg.synthetic.separation);
            if (s.contains("heads")) cfg.synthetic.head_mode = head_mode_from_string(s.at("heads"));
        }

        if (j.contains("model")) {
            expect_keys(j.at("model"), {"hidden"}, "model");
            cfg.hidden = get_or<std::vector<std::size_t>>(j.at("model"), "hidden", cfg.hidden);
        }

        if (j.contains("optimizer")) {
            const json& o = j.at("optimizer");
            expect_keys(o, {"kind", "lr"}, "optimizer");
            if (o.contains("kind")) cfg.optimizer = optim_from_string(o.at("kind"));
            cfg.lr = get_or<double>(o, "lr", cfg.lr);
        }

        if (j.contains("training")) {
            const json& t = j.at("training");
            expect_keys(t, {"epochs", "batch_size"}, "training");
            cfg.epochs = get_or<std::size_t>(t, "epochs", cfg.epochs);
            cfg.batch_size = get_or<std::size_t>(t, "batch_size", cfg.batch_size);
        }

        if (j.contains("strategy")) {
            const json& s = j.at("strategy");
            expect_keys(s, {"kind", "lambda", "gamma", "c", "xi", "memory_per_task", "reg_batch", "weighting"},
                        "strategy");
            if (s.contains("kind")) cfg.strategy.kind = strategy_from_string(s.at("kind"));
            cfg.strategy.lambda = get_or<double>(s, "lambda", cfg.strategy.lambda);
            cfg.strategy.gamma = get_or<double>(s, "gamma", cfg.strategy.gamma);
            cfg.strategy.c = get_or<double>(s, "c", cfg.strategy.c);
            cfg.strategy.xi = get_or<double>(s, "xi", cfg.strategy.xi);
            cfg.strategy.memory_per_task =
                get_or<std::size_t>(s, "memory_per_task", cfg.strategy.memory_per_task);
            cfg.strategy.reg_batch = get_or<std::size_t>(s, "reg_batch", cfg.strategy.reg_batch);
            if (s.contains("weighting")) cfg.strategy.weighting = weighting_from_string(s.at("weighting"));
        }
    } catch (const json::exception& e) {
        throw ConfigError("load_config: " + path + ": " + e.what());
    }

    if (cfg.benchmark != BenchmarkKind::synthetic) {
        const fs::path root = cfg.resolved_data_dir();
        for (const std::string& f :
             {cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels}) {
            if (!fs::exists(root / f)) {
                throw ConfigError("load_config: dataset file missing: " + (root / f).string());
            }
        }
    }
    return cfg;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.n_tasks == 0) throw ConfigError("config: n_tasks must be at least 1");
    if (cfg.epochs == 0) throw ConfigError("config: epochs must be at least 1");
    if (cfg.batch_size == 0) throw ConfigError("config: batch_size must be at least 1");
    if (!(cfg.lr > 0.0)) throw ConfigError("config: lr must be positive");
    if (cfg.benchmark == BenchmarkKind::split && cfg.classes_per_task == 0) {
        throw ConfigError("config: classes_per_task must be at least 1");
    }
    validate(cfg.strategy);
}

namespace {

TaskStream build_stream(const ExperimentConfig& cfg) {
    if (cfg.benchmark == BenchmarkKind::synthetic) {
        SyntheticSpec spec = cfg.synthetic;
        spec.n_tasks = cfg.n_tasks;
        return synthetic_tasks(spec, cfg.seed);
    }

    const fs::path root = cfg.resolved_data_dir();
    LabeledData train = load_idx((root / cfg.train_images).string(), (root / cfg.train_labels).string());
    LabeledData test = load_idx((root / cfg.test_images).string(), (root / cfg.test_labels).string());
    if (cfg.downsample) {
        train = downsample2x(train);
        test = downsample2x(test);
    }
    train = subset(train, cfg.train_subset);
    test = subset(test, cfg.test_subset);

    if (cfg.benchmark == BenchmarkKind::permuted) {
        return permuted_tasks(train, test, cfg.n_tasks, cfg.seed);
    }
    return split_tasks(train, test, cfg.classes_per_task, cfg.seed);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

void write_artifacts(const ExperimentConfig& cfg, const RunReport& rep, const Network& net,
                     const TaskStream& stream, const Strategy& strat) {
    fs::create_directories(cfg.out_dir);
    const fs::path out = cfg.out_dir;

    write_text(out / "rmatrix.csv", rep.rmatrix.to_csv());
    write_text(out / "metrics.json", metrics_json(rep));

    std::ostringstream traj;
    traj.precision(17);
    traj << "after_task,task0_accuracy\n";
    for (std::size_t i = 0; i < rep.task0_trajectory.size(); ++i) {
        traj << i << ',' << rep.task0_trajectory[i] << '\n';
    }
    write_text(out / "trajectory.csv", traj.str());

    for (std::size_t k = 0; k < stream.n_tasks(); ++k) {
        export_embeddings(net, stream.test(k),
                          (out / ("embeddings_task" + std::to_string(k) + ".csv")).string(),
                          cfg.embedding_export_cap);
    }

    if (const ReplayMemory* mem = strat.replay_memory(); mem && !mem->empty()) {
        mem->dump((out / "memory_dump").string());
    }
}

} // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const TaskStream stream = build_stream(cfg);
    const std::size_t n = stream.n_tasks();

    Rng init_rng = Rng::stream(cfg.seed, streams::kInit);
    Network net(stream.train(0).dim(), cfg.hidden, stream.head_policy, init_rng);
    std::unique_ptr<Strategy> strat = make_strategy(cfg.strategy, net, cfg.seed);
    Optimizer opt(cfg.optimizer, cfg.lr, net.parameter_count());

    RunReport rep;
    rep.config = cfg;
    rep.rmatrix = RMatrix(n);

    for (std::size_t i = 0; i < n; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            train_task(net, *strat, opt, stream.train(i), cfg.epochs, cfg.batch_size, cfg.seed);
        } catch (const Error& e) {
            throw Error("task " + std::to_string(i) + ": " + e.what());
        }
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        rep.seconds_per_task.push_back(dt.count());
        rep.total_seconds += dt.count();

        for (std::size_t j = 0; j <= i; ++j) rep.rmatrix.set(i, j, eval_task(net, stream.test(j)));
        rep.task0_trajectory.push_back(rep.rmatrix.get(i, 0));
    }

    rep.accuracy = accuracy(rep.rmatrix);
    rep.bwt = backward_transfer(rep.rmatrix);
    rep.remembering = remembering(rep.bwt);
    rep.positive_bwt = positive_bwt(rep.bwt);
    if (const GemStats* gs = strat->gem_stats()) {
        rep.gem = *gs;
        rep.has_gem_stats = true;
    }

    if (!cfg.out_dir.empty()) write_artifacts(cfg, rep, net, stream, *strat);
    return rep;
}

void export_embeddings(const Network& net, const TaskDataset& test, const std::string& path,
                       std::size_t cap) {
    if (test.size() == 0) throw ContractError("export_embeddings: empty test set");
    NoGradGuard ng;

    const std::size_t rows = cap == 0 ? test.size() : std::min(test.size(), cap);
    std::vector<std::size_t> idx(rows);
    std::iota(idx.begin(), idx.end(), 0);
    auto [x, y] = test.gather(idx);
    const Tensor emb = net.embed(x);
    const std::size_t h = emb.shape()[1];

    const Pca2 pca = pca_top2(emb.data(), rows, h);

    std::ostringstream os;
    os.precision(17);
    os << "label,pc1,pc2";
    for (std::size_t j = 0; j < h; ++j) os << ",h" << j;
    os << '\n';
    std::vector<double> row(h);
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy(emb.data().begin() + static_cast<std::ptrdiff_t>(i * h),
                  emb.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * h), row.begin());
        const auto [p1, p2] = pca.project(row);
        os << y[i] << ',' << p1 << ',' << p2;
        for (std::size_t j = 0; j < h; ++j) os << ',' << row[j];
        os << '\n';
    }
    write_text(path, os.str());
}

std::string metrics_json(const RunReport& rep) {
    json j;
    j["accuracy"] = rep.accuracy;
    j["bwt"] = rep.bwt;
    j["remembering"] = rep.remembering;
    j["positive_bwt"] = rep.positive_bwt;
    j["seconds"] = rep.total_seconds;
    j["seconds_per_task"] = rep.seconds_per_task;
    j["trajectory_task0"] = rep.task0_trajectory;
    j["config"] = config_to_json(rep.config);
    if (rep.has_gem_stats) {
        json g;
        g["steps_total"] = rep.gem.steps_total;
        g["steps_projected"] = rep.gem.steps_projected;
        g["qp_failures"] = rep.gem.qp_failures;
        if (rep.gem.steps_projected > 0) g["min_post_dot"] = rep.gem.min_post_dot;
        j["gem"] = g;
    }
    return j.dump(2) + "\n";
}

std::string timing_report(const std::vector<RunReport>& reports) {
    if (reports.size() < 2) throw ContractError("timing_report: need at least two runs");
    for (const RunReport& r : reports) {
        if (r.config.benchmark != reports.front().config.benchmark ||
            r.rmatrix.n_tasks() != reports.front().rmatrix.n_tasks()) {
            throw ContractError("timing_report: reports come from different benchmarks");
        }
    }

    std::size_t base = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].config.strategy.kind == StrategyKind::naive) {
            base = i;
            break;
        }
    }
    const double base_seconds = reports[base].total_seconds;

    std::ostringstream os;
    os << std::left << std::setw(12) << "strategy" << std::right << std::setw(10) << "accuracy"
       << std::setw(10) << "bwt" << std::setw(12) << "remember" << std::setw(10) << "pos_bwt"
       << std::setw(11) << "seconds" << std::setw(10) << "vs_base" << '\n';
    os << std::fixed;
    for (const RunReport& r : reports) {
        os << std::left << std::setw(12) << to_string(r.config.strategy.kind) << std::right
           << std::setprecision(4) << std::setw(10) << r.accuracy << std::setw(10) << r.bwt
           << std::setw(12) << r.remembering << std::setw(10) << r.positive_bwt
           << std::setprecision(2) << std::setw(11) << r.total_seconds << std::setw(10)
           << (base_seconds > 0.0 ? r.total_seconds / base_seconds : 0.0) << '\n';
    }
    return os.str();
}

} // namespace dg
