#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "driftguard/rng.hpp"
#include "driftguard/tensor.hpp"

namespace dg {

enum class HeadMode { shared, per_task };

/// Output-layer layout: one shared head for all tasks, or one private head
/// per task (classes_per_head outputs each).
struct HeadPolicy {
    HeadMode mode = HeadMode::shared;
    std::size_t classes_per_head = 10;
    std::size_t n_tasks = 1; // number of heads in per_task mode
};

struct ForwardResult {
    Tensor logits;    // B x C, from the selected head
    Tensor embedding; // B x H, post-activation output of the last hidden layer
};

/// Feed-forward ReLU classifier with task-aware output heads.
///
/// Flat parameter order: hidden layers first (W then b each), then heads in
/// task order (W then b each). W is stored row-major as [in x out].
class Network {
public:
    Network(std::size_t input_dim, std::vector<std::size_t> hidden, HeadPolicy policy, Rng& init_rng);

    /// Logits from the head selected by `task` plus the embedding feeding it.
    /// In shared mode the task id is ignored.
    ForwardResult forward(const Tensor& x, std::size_t task) const;

    /// Trunk-only forward: the embedding without any head. Equals
    /// forward(x, t).embedding for every t.
    Tensor embed(const Tensor& x) const;

    std::size_t input_dim() const { return input_dim_; }
    std::size_t embedding_dim() const { return hidden_.empty() ? input_dim_ : hidden_.back(); }
    const std::vector<std::size_t>& hidden_sizes() const { return hidden_; }
    const HeadPolicy& head_policy() const { return policy_; }

    /// All parameter tensors in flat order.
    const std::vector<Tensor>& parameters() const { return params_; }
    std::vector<Tensor>& parameters() { return params_; }
    std::size_t parameter_count() const;

    /// Current parameter values as one vector (no tape participation).
    std::vector<double> flat_params() const;
    void set_flat_params(const std::vector<double>& v);

    /// Accumulated gradients in flat order; parameters without an allocated
    /// gradient buffer contribute zeros.
    std::vector<double> flat_grads() const;
    void set_flat_grads(const std::vector<double>& v);
    void zero_grad();

    /// Taped concatenation of all parameters, for penalties on the flat
    /// vector. Gradient flows back into the individual tensors.
    Tensor flat_params_tensor() const;

    /// Structural + value copy sharing nothing with this network.
    Network clone() const;

    /// Architecture descriptor line + raw little-endian float64 parameter
    /// block.
    void save_checkpoint(const std::string& path) const;
    static Network load_checkpoint(const std::string& path);

private:
    Network() = default;

    struct Affine {
        Tensor w; // in x out
        Tensor b; // out
    };

    Tensor trunk_forward(const Tensor& x) const;
    const Affine& head_for(std::size_t task) const;
    void rebuild_param_list();

    std::size_t input_dim_ = 0;
    std::vector<std::size_t> hidden_;
    HeadPolicy policy_;
    std::vector<Affine> layers_;
    std::vector<Affine> heads_;
    std::vector<Tensor> params_;
};

} // namespace dg
