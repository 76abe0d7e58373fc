#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "driftguard/error.hpp"

namespace dg {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

namespace detail {

/// One node of the define-by-run tape. Nodes for intermediate results are
/// created fresh on every forward pass; parameter leaves persist across
/// passes and accumulate gradient until explicitly zeroed.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // allocated on demand, zero-initialized
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

} // namespace detail

/// Dense row-major float64 tensor participating in reverse-mode autodiff.
/// Copying a Tensor copies the handle, not the storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from(std::vector<double> data, Shape shape);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rank() const { return shape().size(); }
    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);

    std::vector<double>& data();
    const std::vector<double>& data() const;

    /// Gradient buffer; allocated (zeroed) on first access.
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    bool has_grad() const;
    void zero_grad();

    /// Value of a scalar tensor.
    double item() const;

    /// Deep copy of the value, detached from the tape.
    Tensor detach() const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    detail::Node& n();
    const detail::Node& n() const;

    std::shared_ptr<detail::Node> node_;
};

/// While alive, newly created ops do not record tape nodes.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// Primitive operations. Each checks shapes, computes the value and, when
// gradients are enabled and an operand requires them, records the local
// derivative on the tape.

Tensor matmul(const Tensor& a, const Tensor& b);
/// Same-shape elementwise add, or row-broadcast add of a rank-1 bias onto a
/// rank-2 matrix.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
/// Rowwise log-softmax of a rank-2 tensor, max-subtracted for stability.
Tensor log_softmax(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor l2_norm(const Tensor& a);
Tensor scale(const Tensor& a, double s);

/// Mean negative log-softmax probability of the target class.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

/// Mean over rows of the cosine dissimilarity 1 - <a,b>/(|a||b|) between
/// pred and target. The target is treated as a constant. Rows where either
/// vector has zero norm contribute distance 1 with zero gradient.
Tensor cosine_distance_mean(const Tensor& pred, const Tensor& target);

/// Concatenation of rank-whatever tensors into one rank-1 tensor; gradient
/// routes back into each part.
Tensor concat_flat(const std::vector<Tensor>& parts);

/// Reverse pass from a scalar root. Gradients are accumulated into every
/// reachable node that requires them.
void backward(const Tensor& loss);

/// Warning sink used for recoverable numerical conditions (writes to stderr
/// by default; tests may swap it out).
void set_warn_handler(std::function<void(const std::string&)> handler);
void warn(const std::string& msg);

} // namespace dg
