#include "driftguard/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "driftguard/qpsolve.hpp"

namespace dg {

namespace {
// cap on per-sample passes when estimating parameter importance
constexpr std::size_t kImportanceSampleCap = 1024;
} // namespace

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "naive") return StrategyKind::naive;
    if (s == "ewc") return StrategyKind::ewc;
    if (s == "ewc_online") return StrategyKind::ewc_online;
    if (s == "si") return StrategyKind::si;
    if (s == "lwf") return StrategyKind::lwf;
    if (s == "gem") return StrategyKind::gem;
    if (s == "agem") return StrategyKind::agem;
    if (s == "er") return StrategyKind::er;
    throw ConfigError("unknown strategy '" + s + "'");
}

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::naive: return "naive";
        case StrategyKind::ewc: return "ewc";
        case StrategyKind::ewc_online: return "ewc_online";
        case StrategyKind::si: return "si";
        case StrategyKind::lwf: return "lwf";
        case StrategyKind::gem: return "gem";
        case StrategyKind::agem: return "agem";
        case StrategyKind::er: return "er";
    }
    throw ConfigError("invalid strategy kind");
}

void validate(const StrategyConfig& cfg) {
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
        throw ConfigError("strategy: lambda must be finite and >= 0");
    }
    if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ConfigError("strategy: gamma must be in [0,1]");
    if (!(cfg.c >= 0.0 && cfg.c <= 1.0)) throw ConfigError("strategy: c must be in [0,1]");
    if (!(cfg.xi > 0.0)) throw ConfigError("strategy: xi must be positive");
    if (cfg.memory_per_task == 0) throw ConfigError("strategy: memory_per_task must be positive");
    if (cfg.reg_batch == 0) throw ConfigError("strategy: reg_batch must be positive");
}

Tensor ewc_penalty(const Tensor& theta, const std::vector<ConsolidatedTask>& consolidated,
                   double lambda) {
    if (consolidated.empty() || lambda == 0.0) return Tensor::scalar(0.0);
    const std::size_t p = theta.size();
    Tensor total;
    for (const auto& ct : consolidated) {
        if (ct.theta_star.size() != p || ct.fisher.size() != p) {
            throw ShapeError("ewc_penalty: snapshot length mismatch for task " +
                             std::to_string(ct.task_id));
        }
        const Tensor star = Tensor::from(ct.theta_star, {p});
        const Tensor fisher = Tensor::from(ct.fisher, {p});
        const Tensor diff = sub(theta, star);
        const Tensor term = scale(sum(mul(fisher, mul(diff, diff))), lambda / 2.0);
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

std::vector<double> fisher_diagonal(Network& net, const TaskDataset& data,
                                    const std::vector<std::size_t>& rows, std::size_t task) {
    if (rows.empty()) throw ContractError("fisher_diagonal: empty batch");
    const std::size_t p = net.parameter_count();
    std::vector<double> fisher(p, 0.0);
    std::vector<std::size_t> one(1);
    for (std::size_t r : rows) {
        one[0] = r;
        auto [x, y] = data.gather(one);
        net.zero_grad();
        const ForwardResult out = net.forward(x, task);
        backward(cross_entropy(out.logits, y));
        const std::vector<double> g = net.flat_grads();
        for (std::size_t z = 0; z < p; ++z) fisher[z] += g[z] * g[z];
    }
    net.zero_grad();
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double& f : fisher) f *= inv;
    return fisher;
}

std::vector<double> online_fisher_update(const std::vector<double>& f_new,
                                         const std::vector<double>& f_prev, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("online_fisher_update: gamma must be in [0,1]");
    if (f_new.size() != f_prev.size()) throw ShapeError("online_fisher_update: length mismatch");
    std::vector<double> out(f_new.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f_new[i] + gamma * f_prev[i];
    return out;
}

Tensor lwf_penalty(const Tensor& old_probs, const Tensor& new_logits, double lambda) {
    if (old_probs.shape() != new_logits.shape() || old_probs.rank() != 2) {
        throw ShapeError("lwf_penalty: old_probs and new_logits must share a BxC shape");
    }
    if (old_probs.requires_grad()) throw ContractError("lwf_penalty: old_probs must be frozen");
    const std::size_t b = old_probs.shape()[0];
    const std::size_t c = old_probs.shape()[1];
    const auto& probs = old_probs.data();
    for (std::size_t i = 0; i < b; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < c; ++j) row += probs[i * c + j];
        if (std::fabs(row - 1.0) > 1e-6) {
            throw ContractError("lwf_penalty: old_probs row " + std::to_string(i) +
                                " does not sum to 1");
        }
    }
    return scale(sum(mul(old_probs, log_softmax(new_logits))), -lambda / static_cast<double>(b));
}

void si_accumulate(std::vector<double>& path, const std::vector<double>& grads_before,
                   const std::vector<double>& delta_theta) {
    if (path.size() != grads_before.size() || path.size() != delta_theta.size()) {
        throw ShapeError("si_accumulate: length mismatch");
    }
    for (std::size_t z = 0; z < path.size(); ++z) path[z] -= grads_before[z] * delta_theta[z];
}

std::vector<double> si_consolidate(const std::vector<double>& path,
                                   const std::vector<double>& theta_start,
                                   const std::vector<double>& theta_end, double xi, double c) {
    if (!(xi > 0.0)) throw ConfigError("si_consolidate: xi must be positive");
    if (path.size() != theta_start.size() || path.size() != theta_end.size()) {
        throw ShapeError("si_consolidate: length mismatch");
    }
    std::vector<double> importance(path.size());
    for (std::size_t z = 0; z < path.size(); ++z) {
        const double delta = theta_end[z] - theta_start[z];
        importance[z] = std::max(0.0, c * path[z] / (delta * delta + xi));
    }
    return importance;
}

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace

GemProjection gem_project(const std::vector<double>& g_prime,
                          const std::vector<std::vector<double>>& task_grads) {
    GemProjection out;
    out.g = g_prime;
    if (task_grads.empty()) return out;

    const std::size_t t_count = task_grads.size();
    std::vector<double> dots(t_count);
    bool violated = false;
    for (std::size_t t = 0; t < t_count; ++t) {
        if (task_grads[t].size() != g_prime.size()) throw ShapeError("gem_project: gradient length mismatch");
        dots[t] = vdot(g_prime, task_grads[t]);
        if (dots[t] < 0.0) violated = true;
    }
    if (!violated) return out;

    NnQp qp;
    qp.T = t_count;
    qp.Q.resize(t_count * t_count);
    qp.b = dots; // G g'
    for (std::size_t i = 0; i < t_count; ++i) {
        for (std::size_t j = i; j < t_count; ++j) {
            const double q = vdot(task_grads[i], task_grads[j]);
            qp.Q[i * t_count + j] = q;
            qp.Q[j * t_count + i] = q;
        }
    }
    const QpResult sol = solve_nnqp(qp);
    if (!sol.converged) {
        warn("gem_project: dual QP did not converge; keeping the raw gradient");
        out.qp_converged = false;
        return out;
    }
    out.projected = true;
    for (std::size_t t = 0; t < t_count; ++t) {
        const double v = sol.v[t];
        if (v == 0.0) continue;
        const auto& gt = task_grads[t];
        for (std::size_t z = 0; z < out.g.size(); ++z) out.g[z] += v * gt[z];
    }
    return out;
}

std::vector<double> agem_project(const std::vector<double>& g_prime,
                                 const std::vector<double>& g_ref) {
    if (g_prime.size() != g_ref.size()) throw ShapeError("agem_project: gradient length mismatch");
    const double along = vdot(g_prime, g_ref);
    if (along >= 0.0) return g_prime;
    const double denom = vdot(g_ref, g_ref);
    if (denom == 0.0) return g_prime;
    std::vector<double> out(g_prime.size());
    const double k = along / denom;
    for (std::size_t z = 0; z < out.size(); ++z) out[z] = g_prime[z] - k * g_ref[z];
    return out;
}

std::optional<double> er_regularize(Network& net, ReplayMemory& mem, double lambda,
                                    std::size_t reg_batch, Optimizer& opt, Rng& rng,
                                    const Tensor& current_batch) {
    if (mem.empty() || lambda == 0.0 || reg_batch == 0) return std::nullopt;

    const std::vector<std::size_t> drawn = mem.sample(reg_batch, rng);
    const std::size_t k = drawn.size();
    const std::size_t d = mem.entries()[drawn[0]].x.size();
    const std::size_t h = mem.entries()[drawn[0]].h.size();

    std::vector<double> xs(k * d), hs(k * h);
    for (std::size_t i = 0; i < k; ++i) {
        const MemoryEntry& e = mem.entries()[drawn[i]];
        if (e.x.size() != d || e.h.size() != h) throw ShapeError("er_regularize: entry width mismatch");
        std::copy(e.x.begin(), e.x.end(), xs.begin() + static_cast<std::ptrdiff_t>(i * d));
        std::copy(e.h.begin(), e.h.end(), hs.begin() + static_cast<std::ptrdiff_t>(i * h));
    }
    const Tensor x = Tensor::from(std::move(xs), {k, d});
    const Tensor h_star = Tensor::from(std::move(hs), {k, h});

    const Tensor emb = net.embed(x);
    if (emb.shape()[1] != h) {
        throw ShapeError("er_regularize: stored embeddings do not match the current network width");
    }

    // pre-step per-entry distances, for the reweighting schemes and the report
    std::vector<double> distances(k);
    {
        const auto& ev = emb.data();
        const auto& hv = h_star.data();
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<double> a(ev.begin() + static_cast<std::ptrdiff_t>(i * h),
                                  ev.begin() + static_cast<std::ptrdiff_t>((i + 1) * h));
            std::vector<double> b(hv.begin() + static_cast<std::ptrdiff_t>(i * h),
                                  hv.begin() + static_cast<std::ptrdiff_t>((i + 1) * h));
            distances[i] = cosine_distance(a, b);
        }
    }
    double mean_distance = 0.0;
    for (double v : distances) mean_distance += v;
    mean_distance /= static_cast<double>(k);

    net.zero_grad();
    backward(scale(cosine_distance_mean(emb, h_star), lambda));
    opt.step(net);

    switch (mem.weighting()) {
        case Weighting::uniform: break;
        case Weighting::frequency: mem.reweight_frequency(); break;
        case Weighting::distance: mem.reweight_distance(drawn, distances); break;
        case Weighting::pretrained_reference:
            mem.reweight_pretrained_reference(current_batch, drawn);
            break;
    }
    return mean_distance;
}

// ---------------------------------------------------------------------------
// strategy classes

namespace {

class NaiveStrategy final : public Strategy {
public:
    StrategyKind kind() const override { return StrategyKind::naive; }
};

class EwcStrategy final : public Strategy {
public:
    EwcStrategy(const StrategyConfig& cfg, std::uint64_t run_seed, bool online)
        : lambda_(cfg.lambda), gamma_(cfg.gamma), online_(online),
          rng_(Rng::stream(run_seed, streams::kFisher)) {}

    StrategyKind kind() const override {
        return online_ ? StrategyKind::ewc_online : StrategyKind::ewc;
    }

    Tensor penalty(const Network& net, const Tensor&, std::size_t) override {
        if (lambda_ == 0.0 || consolidated_.empty()) return Tensor();
        return ewc_penalty(net.flat_params_tensor(), consolidated_, lambda_);
    }

    void after_task(Network& net, const TaskDataset& train, std::size_t task) override {
        if (lambda_ == 0.0) return;
        const std::size_t take = std::min(kImportanceSampleCap, train.size());
        const std::vector<std::size_t> rows = rng_.sample_without_replacement(train.size(), take);
        std::vector<double> fisher = fisher_diagonal(net, train, rows, task);
        if (online_ && !consolidated_.empty()) {
            ConsolidatedTask& running = consolidated_.front();
            running.fisher = online_fisher_update(fisher, running.fisher, gamma_);
            running.theta_star = net.flat_params();
            running.task_id = task;
        } else {
            consolidated_.push_back({net.flat_params(), std::move(fisher), task});
        }
    }

private:
    double lambda_;
    double gamma_;
    bool online_;
    Rng rng_;
    std::vector<ConsolidatedTask> consolidated_;
};

class SiStrategy final : public Strategy {
public:
    explicit SiStrategy(const StrategyConfig& cfg) : lambda_(cfg.lambda), c_(cfg.c), xi_(cfg.xi) {}

    StrategyKind kind() const override { return StrategyKind::si; }

    Tensor penalty(const Network& net, const Tensor&, std::size_t) override {
        if (!active() || consolidated_.empty()) return Tensor();
        return ewc_penalty(net.flat_params_tensor(), consolidated_, lambda_);
    }

    void before_step(Network& net) override {
        if (!active()) return;
        grads_before_ = net.flat_grads();
        theta_before_ = net.flat_params();
        if (path_.empty()) path_.assign(theta_before_.size(), 0.0);
        if (need_task_start_) {
            theta_task_start_ = theta_before_;
            need_task_start_ = false;
        }
    }

    void after_step(Network& net, Optimizer&, std::size_t, const Tensor&) override {
        if (!active()) return;
        std::vector<double> delta = net.flat_params();
        for (std::size_t z = 0; z < delta.size(); ++z) delta[z] -= theta_before_[z];
        si_accumulate(path_, grads_before_, delta);
    }

    void after_task(Network& net, const TaskDataset&, std::size_t task) override {
        if (!active()) return;
        const std::vector<double> theta_end = net.flat_params();
        if (need_task_start_) theta_task_start_ = theta_end; // task had zero steps
        std::vector<double> contrib = si_consolidate(path_, theta_task_start_, theta_end, xi_, c_);
        if (consolidated_.empty()) {
            consolidated_.push_back({theta_end, std::move(contrib), task});
        } else {
            ConsolidatedTask& running = consolidated_.front();
            for (std::size_t z = 0; z < contrib.size(); ++z) running.fisher[z] += contrib[z];
            running.theta_star = theta_end;
            running.task_id = task;
        }
        std::fill(path_.begin(), path_.end(), 0.0);
        need_task_start_ = true;
    }

private:
    bool active() const { return lambda_ > 0.0 && c_ > 0.0; }

    double lambda_;
    double c_;
    double xi_;
    std::vector<double> path_;
    std::vector<double> grads_before_;
    std::vector<double> theta_before_;
    std::vector<double> theta_task_start_;
    bool need_task_start_ = true;
    std::vector<ConsolidatedTask> consolidated_; // single running importance
};

class LwfStrategy final : public Strategy {
public:
    explicit LwfStrategy(const StrategyConfig& cfg) : lambda_(cfg.lambda) {}

    StrategyKind kind() const override { return StrategyKind::lwf; }

    Tensor penalty(const Network& net, const Tensor& batch_x, std::size_t task) override {
        if (lambda_ == 0.0 || !teacher_) return Tensor();
        const HeadPolicy& policy = net.head_policy();
        if (policy.mode == HeadMode::shared) {
            return lwf_penalty(teacher_probs(batch_x, task), net.forward(batch_x, task).logits, lambda_);
        }
        if (task == 0) return Tensor();
        Tensor total;
        const double per_head = lambda_ / static_cast<double>(task);
        for (std::size_t head = 0; head < task; ++head) {
            const Tensor term =
                lwf_penalty(teacher_probs(batch_x, head), net.forward(batch_x, head).logits, per_head);
            total = total.defined() ? add(total, term) : term;
        }
        return total;
    }

    void after_task(Network& net, const TaskDataset&, std::size_t) override {
        if (lambda_ == 0.0) return;
        teacher_.reset();
        teacher_.emplace(net.clone());
    }

private:
    Tensor teacher_probs(const Tensor& batch_x, std::size_t head) const {
        NoGradGuard ng;
        const Tensor log_p = log_softmax(teacher_->forward(batch_x, head).logits);
        std::vector<double> p(log_p.data().size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_p.data()[i]);
        return Tensor::from(std::move(p), log_p.shape());
    }

    double lambda_;
    std::optional<Network> teacher_;
};

class GemStrategy final : public Strategy {
public:
    GemStrategy(const StrategyConfig& cfg, std::uint64_t run_seed)
        : budget_(cfg.memory_per_task), rng_(Rng::stream(run_seed, streams::kExemplar)) {}

    StrategyKind kind() const override { return StrategyKind::gem; }

    void transform_gradients(Network& net, std::size_t) override {
        if (store_.empty()) return;
        stats_.steps_total += 1;

        const std::vector<double> g_prime = net.flat_grads();
        std::vector<std::vector<double>> task_grads;
        task_grads.reserve(store_.size());
        for (const auto& ex : store_) {
            net.zero_grad();
            backward(cross_entropy(net.forward(ex.x, ex.task).logits, ex.y));
            task_grads.push_back(net.flat_grads());
        }

        GemProjection proj = gem_project(g_prime, task_grads);
        if (!proj.qp_converged) stats_.qp_failures += 1;
        if (proj.projected) {
            stats_.steps_projected += 1;
            for (const auto& gt : task_grads) {
                stats_.min_post_dot = std::min(stats_.min_post_dot, vdot(proj.g, gt));
            }
        }
        net.set_flat_grads(proj.g);
    }

    void after_task(Network&, const TaskDataset& train, std::size_t task) override {
        std::size_t take = budget_;
        if (take > train.size()) {
            warn("gradient memory budget " + std::to_string(budget_) + " exceeds task size " +
                 std::to_string(train.size()) + "; storing the whole task");
            take = train.size();
        }
        auto [x, y] = train.gather(rng_.sample_without_replacement(train.size(), take));
        store_.push_back({std::move(x), std::move(y), task});
    }

    const GemStats* gem_stats() const override { return &stats_; }

private:
    struct TaskExemplars {
        Tensor x;
        std::vector<int> y;
        std::size_t task;
    };

    std::size_t budget_;
    Rng rng_;
    std::vector<TaskExemplars> store_;
    GemStats stats_;
};

class AgemStrategy final : public Strategy {
public:
    AgemStrategy(const StrategyConfig& cfg, std::uint64_t run_seed)
        : budget_(cfg.memory_per_task), reg_batch_(cfg.reg_batch),
          rng_(Rng::stream(run_seed, streams::kExemplar)) {}

    StrategyKind kind() const override { return StrategyKind::agem; }

    void transform_gradients(Network& net, std::size_t) override {
        if (pool_x_.empty()) return;

        const std::vector<double> g_prime = net.flat_grads();
        const std::size_t take = std::min(reg_batch_, pool_x_.size());
        const std::vector<std::size_t> rows = rng_.sample_without_replacement(pool_x_.size(), take);

        // group the reference batch by task so each group runs its own head
        std::vector<std::vector<std::size_t>> by_task;
        for (std::size_t r : rows) {
            const std::size_t t = pool_t_[r];
            if (by_task.size() <= t) by_task.resize(t + 1);
            by_task[t].push_back(r);
        }

        net.zero_grad();
        Tensor ref_loss;
        const std::size_t d = pool_x_.front().size();
        for (std::size_t t = 0; t < by_task.size(); ++t) {
            const auto& group = by_task[t];
            if (group.empty()) continue;
            std::vector<double> xs(group.size() * d);
            std::vector<int> ys(group.size());
            for (std::size_t i = 0; i < group.size(); ++i) {
                std::copy(pool_x_[group[i]].begin(), pool_x_[group[i]].end(),
                          xs.begin() + static_cast<std::ptrdiff_t>(i * d));
                ys[i] = pool_y_[group[i]];
            }
            const Tensor x = Tensor::from(std::move(xs), {group.size(), d});
            const Tensor term = scale(cross_entropy(net.forward(x, t).logits, ys),
                                      static_cast<double>(group.size()) / static_cast<double>(take));
            ref_loss = ref_loss.defined() ? add(ref_loss, term) : term;
        }
        backward(ref_loss);
        const std::vector<double> g_ref = net.flat_grads();

        net.set_flat_grads(agem_project(g_prime, g_ref));
    }

    void after_task(Network&, const TaskDataset& train, std::size_t task) override {
        std::size_t take = budget_;
        if (take > train.size()) {
            warn("gradient memory budget " + std::to_string(budget_) + " exceeds task size " +
                 std::to_string(train.size()) + "; storing the whole task");
            take = train.size();
        }
        const std::vector<std::size_t> rows = rng_.sample_without_replacement(train.size(), take);
        const std::size_t d = train.dim();
        const auto& src = train.inputs.data();
        for (std::size_t r : rows) {
            pool_x_.emplace_back(src.begin() + static_cast<std::ptrdiff_t>(r * d),
                                 src.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
            pool_y_.push_back(train.labels[r]);
            pool_t_.push_back(task);
        }
    }

private:
    std::size_t budget_;
    std::size_t reg_batch_;
    Rng rng_;
    std::vector<std::vector<double>> pool_x_;
    std::vector<int> pool_y_;
    std::vector<std::size_t> pool_t_;
};

class ErStrategy final : public Strategy {
public:
    ErStrategy(const StrategyConfig& cfg, const Network& arch, std::uint64_t run_seed)
        : lambda_(cfg.lambda), reg_batch_(cfg.reg_batch),
          mem_(cfg.memory_per_task, cfg.weighting),
          rng_(Rng::stream(run_seed, streams::kMemory)) {
        if (cfg.weighting == Weighting::pretrained_reference) {
            Rng ref_rng = Rng::stream(run_seed, streams::kRefNet);
            mem_.set_reference_net(std::make_shared<Network>(arch.input_dim(), arch.hidden_sizes(),
                                                             arch.head_policy(), ref_rng));
        }
    }

    StrategyKind kind() const override { return StrategyKind::er; }

    void after_step(Network& net, Optimizer& opt, std::size_t, const Tensor& batch_x) override {
        if (lambda_ == 0.0) return;
        er_regularize(net, mem_, lambda_, reg_batch_, opt, rng_, batch_x);
    }

    void after_task(Network& net, const TaskDataset& train, std::size_t) override {
        if (lambda_ == 0.0) return;
        mem_.commit_task(net, train, rng_);
    }

    const ReplayMemory* replay_memory() const override { return &mem_; }

private:
    double lambda_;
    std::size_t reg_batch_;
    ReplayMemory mem_;
    Rng rng_;
};

} // namespace

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg, const Network& arch,
                                        std::uint64_t run_seed) {
    validate(cfg);
    switch (cfg.kind) {
        case StrategyKind::naive: return std::make_unique<NaiveStrategy>();
        case StrategyKind::ewc: return std::make_unique<EwcStrategy>(cfg, run_seed, false);
        case StrategyKind::ewc_online: return std::make_unique<EwcStrategy>(cfg, run_seed, true);
        case StrategyKind::si: return std::make_unique<SiStrategy>(cfg);
        case StrategyKind::lwf: return std::make_unique<LwfStrategy>(cfg);
        case StrategyKind::gem: return std::make_unique<GemStrategy>(cfg, run_seed);
        case StrategyKind::agem: return std::make_unique<AgemStrategy>(cfg, run_seed);
        case StrategyKind::er: return std::make_unique<ErStrategy>(cfg, arch, run_seed);
    }
    throw ConfigError("invalid strategy kind");
}

void train_task(Network& net, Strategy& strat, Optimizer& opt, const TaskDataset& train,
                std::size_t epochs, std::size_t batch_size, std::uint64_t run_seed) {
    if (epochs == 0) throw ConfigError("train_task: epochs must be at least 1");
    if (batch_size == 0) throw ConfigError("train_task: batch_size must be at least 1");
    if (train.size() == 0) throw ContractError("train_task: empty training set");

    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng =
            Rng::stream(run_seed, Rng::mix(streams::kShuffle, Rng::mix(train.task_id, epoch)));
        shuffle_rng.shuffle(order);

        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t stop = std::min(n, start + batch_size);
            const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(stop));
            auto [x, y] = train.gather(rows);

            net.zero_grad();
            Tensor loss = cross_entropy(net.forward(x, train.task_id).logits, y);
            const Tensor pen = strat.penalty(net, x, train.task_id);
            if (pen.defined()) loss = add(loss, pen);
            backward(loss);

            strat.transform_gradients(net, train.task_id);
            strat.before_step(net);
            opt.step(net);
            strat.after_step(net, opt, train.task_id, x);
        }
    }

    strat.after_task(net, train, train.task_id);
    opt.reset();
}

} // namespace dg
