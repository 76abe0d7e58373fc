#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "driftguard/data.hpp"
#include "driftguard/model.hpp"
#include "driftguard/rng.hpp"
#include "driftguard/tensor.hpp"

namespace dg {

enum class Weighting { uniform, frequency, distance, pretrained_reference };

Weighting weighting_from_string(const std::string& s);
std::string to_string(Weighting w);

/// One stored rehearsal example: input, source task, embedding snapshot
/// taken when that task finished, and its (unnormalized) sampling weight.
struct MemoryEntry {
    std::vector<double> x;
    std::size_t t = 0;
    std::vector<double> h;
    double p = 1.0;
    std::size_t pick_count = 0;
    std::optional<double> last_distance;
};

/// Fixed per-task-budget rehearsal store with weighted sampling.
class ReplayMemory {
public:
    ReplayMemory() = default;
    ReplayMemory(std::size_t per_task_budget, Weighting weighting)
        : per_task_budget_(per_task_budget), weighting_(weighting) {}

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t per_task_budget() const { return per_task_budget_; }
    Weighting weighting() const { return weighting_; }
    const std::vector<MemoryEntry>& entries() const { return entries_; }
    MemoryEntry& entry(std::size_t i) { return entries_.at(i); }

    void set_reference_net(std::shared_ptr<Network> net) { reference_net_ = std::move(net); }
    const Network* reference_net() const { return reference_net_.get(); }

    /// Stores `per_task_budget` inputs drawn uniformly without replacement
    /// from the finished task, each with its current embedding and weight 1.
    /// A budget larger than the task stores everything (with a warning).
    void commit_task(const Network& net, const TaskDataset& task, Rng& rng);

    /// k weighted draws with replacement; increments pick counts.
    /// Returns entry indices; empty memory yields an empty list.
    std::vector<std::size_t> sample(std::size_t k, Rng& rng);

    /// p_i = 1 / (1 + pick_count_i), applied to every entry.
    void reweight_frequency();

    /// Sets drawn entries' weights to their measured embedding drift
    /// (distance + epsilon floor); undrawn entries keep their weight.
    void reweight_distance(const std::vector<std::size_t>& drawn, const std::vector<double>& distances);

    /// Sets drawn entries' weights to the mean cosine dissimilarity between
    /// the frozen reference net's embedding of the entry and of each batch row.
    void reweight_pretrained_reference(const Tensor& current_batch, const std::vector<std::size_t>& drawn);

    /// Normalized sampling distribution (sums to 1); empty when no entries.
    std::vector<double> normalized_weights() const;

    /// Writes index.json plus raw little-endian float64 blocks x.f64 / h.f64.
    void dump(const std::string& dir) const;

private:
    std::vector<MemoryEntry> entries_;
    std::size_t per_task_budget_ = 0;
    Weighting weighting_ = Weighting::uniform;
    std::shared_ptr<Network> reference_net_;
};

/// Cosine dissimilarity 1 - cos(a, b) on raw vectors; zero-norm input
/// counts as maximally dissimilar (distance 1).
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

} // namespace dg
