#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "driftguard/data.hpp"
#include "driftguard/memory.hpp"
#include "driftguard/model.hpp"
#include "driftguard/optim.hpp"
#include "driftguard/rng.hpp"
#include "driftguard/tensor.hpp"

namespace dg {

/// Tags deriving the independent random streams of one run from its seed.
/// Keeping every consumer on its own stream means optional machinery
/// (memory sampling, Fisher draws, reference nets) never perturbs the
/// training trajectory.
namespace streams {
inline constexpr std::uint64_t kInit = 0x696e6974;     // network init
inline constexpr std::uint64_t kShuffle = 0x73686668;  // per-(task,epoch) batch order
inline constexpr std::uint64_t kMemory = 0x6d656d72;   // rehearsal store ops
inline constexpr std::uint64_t kRefNet = 0x7265666e;   // frozen reference net init
inline constexpr std::uint64_t kFisher = 0x66697368;   // importance-estimation draws
inline constexpr std::uint64_t kExemplar = 0x6578656d; // gradient-memory commits
} // namespace streams

enum class StrategyKind { naive, ewc, ewc_online, si, lwf, gem, agem, er };

StrategyKind strategy_from_string(const std::string& s);
std::string to_string(StrategyKind k);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::naive;
    double lambda = 1.0;          // penalty strength
    double gamma = 1.0;           // running-importance discount (online consolidation)
    double c = 1.0;               // path-importance scale
    double xi = 0.1;              // path-importance damping
    std::size_t memory_per_task = 100;
    std::size_t reg_batch = 64;   // rehearsal batch size B'
    Weighting weighting = Weighting::uniform;
};

/// Throws ConfigError when a field is outside its legal range.
void validate(const StrategyConfig& cfg);

/// Frozen importance snapshot of one finished task.
struct ConsolidatedTask {
    std::vector<double> theta_star;
    std::vector<double> fisher;
    std::size_t task_id = 0;
};

/// sum over snapshots of (lambda/2) * sum_z F_z (theta*_z - theta_z)^2,
/// with gradient flowing into theta.
Tensor ewc_penalty(const Tensor& theta, const std::vector<ConsolidatedTask>& consolidated,
                   double lambda);

/// Empirical Fisher diagonal: mean over the batch of the squared
/// per-sample gradient of the log-likelihood at the observed label.
/// Clobbers the network's accumulated gradients.
std::vector<double> fisher_diagonal(Network& net, const TaskDataset& data,
                                    const std::vector<std::size_t>& rows, std::size_t task);

/// f_new + gamma * f_prev (the single running importance kept online).
std::vector<double> online_fisher_update(const std::vector<double>& f_new,
                                         const std::vector<double>& f_prev, double gamma);

/// -(lambda/B') * sum_i sum_c old_prob * log softmax(new_logits).
/// old_probs rows must be probability vectors; treated as constants.
Tensor lwf_penalty(const Tensor& old_probs, const Tensor& new_logits, double lambda);

/// Path-importance accumulation for one optimizer step:
/// path_z += -grad_z * delta_theta_z.
void si_accumulate(std::vector<double>& path, const std::vector<double>& grads_before,
                   const std::vector<double>& delta_theta);

/// Per-parameter importance c * path_z / ((theta_end - theta_start)^2 + xi),
/// clamped at zero from below.
std::vector<double> si_consolidate(const std::vector<double>& path,
                                   const std::vector<double>& theta_start,
                                   const std::vector<double>& theta_end, double xi, double c);

struct GemProjection {
    std::vector<double> g;
    bool projected = false;    // true when the dual QP ran
    bool qp_converged = true;  // false means g fell back to g_prime
};

/// If every <g_prime, g_t> >= 0 returns g_prime untouched; otherwise solves
/// the nonnegative dual QP and returns G^T v* + g_prime. A non-converging QP
/// falls back to g_prime with a warning.
GemProjection gem_project(const std::vector<double>& g_prime,
                          const std::vector<std::vector<double>>& task_grads);

/// Single-constraint projection: g_prime - (<g_prime,g_ref>/<g_ref,g_ref>) g_ref
/// when <g_prime, g_ref> < 0, else g_prime. Zero g_ref passes g_prime through.
std::vector<double> agem_project(const std::vector<double>& g_prime,
                                 const std::vector<double>& g_ref);

/// Counters for the gradient-projection constraint audit.
struct GemStats {
    std::size_t steps_total = 0;
    std::size_t steps_projected = 0;
    std::size_t qp_failures = 0;
    /// min over projected steps and past tasks of <g_final, g_t>.
    double min_post_dot = std::numeric_limits<double>::infinity();
};

/// Rehearsal step: draws reg_batch stored entries, recomputes their
/// embeddings, takes one optimizer step on lambda * mean cosine
/// dissimilarity to the stored snapshots, then applies the configured
/// reweighting. Returns the pre-step mean distance, or nullopt when the
/// memory is empty.
std::optional<double> er_regularize(Network& net, ReplayMemory& mem, double lambda,
                                    std::size_t reg_batch, Optimizer& opt, Rng& rng,
                                    const Tensor& current_batch);

/// Training-loop hooks. A strategy instance is bound to a single run.
class Strategy {
public:
    virtual ~Strategy() = default;
    virtual StrategyKind kind() const = 0;
    std::string name() const { return to_string(kind()); }

    /// Additive loss penalty for the main step; undefined tensor = none.
    virtual Tensor penalty(const Network& net, const Tensor& batch_x, std::size_t task) {
        (void)net;
        (void)batch_x;
        (void)task;
        return Tensor();
    }

    /// Rewrites accumulated gradients in place between backward and step.
    virtual void transform_gradients(Network& net, std::size_t task) {
        (void)net;
        (void)task;
    }

    /// Observation point right before the optimizer applies the update.
    virtual void before_step(Network& net) { (void)net; }

    /// Runs right after the main update (extra optimization, accumulation).
    virtual void after_step(Network& net, Optimizer& opt, std::size_t task, const Tensor& batch_x) {
        (void)net;
        (void)opt;
        (void)task;
        (void)batch_x;
    }

    /// Consolidation once a task's training completes.
    virtual void after_task(Network& net, const TaskDataset& train, std::size_t task) {
        (void)net;
        (void)train;
        (void)task;
    }

    virtual const GemStats* gem_stats() const { return nullptr; }
    virtual const ReplayMemory* replay_memory() const { return nullptr; }
};

/// Builds the configured strategy. `arch` supplies the architecture for
/// auxiliary networks; run_seed feeds the strategy's private rng streams.
std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg, const Network& arch,
                                        std::uint64_t run_seed);

/// One task of the sequential protocol: shuffled mini-batches, main
/// cross-entropy step with the strategy's penalty and gradient hooks, the
/// strategy's post-step work, then end-of-task consolidation and an
/// optimizer reset.
void train_task(Network& net, Strategy& strat, Optimizer& opt, const TaskDataset& train,
                std::size_t epochs, std::size_t batch_size, std::uint64_t run_seed);

} // namespace dg
