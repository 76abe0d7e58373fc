#include "driftguard/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "driftguard/kernels.hpp"

namespace dg {

using detail::Node;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

std::function<void(const std::string&)>& warn_handler() {
    static std::function<void(const std::string&)> handler = [](const std::string& msg) {
        std::cerr << "[driftguard] warning: " << msg << '\n';
    };
    return handler;
}

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a) {
    throw ShapeError(std::string(op) + ": invalid shape " + shape_str(a));
}

bool taping(std::initializer_list<const Tensor*> inputs) {
    if (!g_grad_enabled) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void add_scaled_acc(std::vector<double>& dst, const std::vector<double>& src, double s) {
    kernels::active().axpy(dst.size(), s, src.data(), dst.data());
}

} // namespace

void set_warn_handler(std::function<void(const std::string&)> handler) {
    warn_handler() = std::move(handler);
}

void warn(const std::string& msg) { warn_handler()(msg); }

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double v) {
    const std::size_t n = numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::from(std::vector<double> data, Shape shape) {
    if (numel(shape) != data.size()) {
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
    return Tensor(make_node(std::move(shape), std::move(data)));
}

Tensor Tensor::scalar(double v) { return Tensor(make_node({}, {v})); }

Node& Tensor::n() {
    if (!node_) throw ContractError("Tensor: operation on an empty handle");
    return *node_;
}

const Node& Tensor::n() const {
    if (!node_) throw ContractError("Tensor: operation on an empty handle");
    return *node_;
}

const Shape& Tensor::shape() const { return n().shape; }
std::size_t Tensor::size() const { return n().value.size(); }
bool Tensor::requires_grad() const { return n().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    n().requires_grad = on;
    return *this;
}

std::vector<double>& Tensor::data() { return n().value; }
const std::vector<double>& Tensor::data() const { return n().value; }

std::vector<double>& Tensor::grad() {
    n().ensure_grad();
    return n().grad;
}

const std::vector<double>& Tensor::grad() const {
    const_cast<Node&>(n()).ensure_grad();
    return n().grad;
}

bool Tensor::has_grad() const { return !n().grad.empty(); }

void Tensor::zero_grad() {
    if (!n().grad.empty()) std::fill(n().grad.begin(), n().grad.end(), 0.0);
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("Tensor::item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return n().value[0];
}

Tensor Tensor::detach() const { return Tensor(make_node(n().shape, n().value)); }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        shape_fail("matmul", a.shape(), b.shape());
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n2 = b.shape()[1];
    auto out = make_node({m, n2}, std::vector<double>(m * n2));
    kernels::active().gemm_nn(m, n2, k, a.data().data(), b.data().data(), out->value.data(), false);

    if (taping({&a, &b})) {
        out->requires_grad = true;
        out->parents = {a.node(), b.node()};
        out->backward = [m, k, n2](Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                kernels::active().gemm_nt(m, k, n2, self.grad.data(), pb.value.data(), pa.grad.data(), true);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                kernels::active().gemm_tn(k, n2, m, pa.value.data(), self.grad.data(), pb.grad.data(), true);
            }
        };
    }
    return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    const bool broadcast = a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0];
    if (!broadcast && a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());

    auto out = make_node(a.shape(), std::vector<double>(a.size()));
    if (broadcast) {
        const std::size_t rows = a.shape()[0], cols = a.shape()[1];
        for (std::size_t i = 0; i < rows; ++i) {
            kernels::active().add(cols, a.data().data() + i * cols, b.data().data(), out->value.data() + i * cols);
        }
    } else {
        kernels::active().add(a.size(), a.data().data(), b.data().data(), out->value.data());
    }

    if (taping({&a, &b})) {
        out->requires_grad = true;
        out->parents = {a.node(), b.node()};
        out->backward = [broadcast](Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                add_scaled_acc(pa.grad, self.grad, 1.0);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                if (broadcast) {
                    const std::size_t cols = pb.value.size();
                    const std::size_t rows = self.value.size() / cols;
                    for (std::size_t i = 0; i < rows; ++i) {
                        kernels::active().add(cols, pb.grad.data(), self.grad.data() + i * cols, pb.grad.data());
                    }
                } else {
                    add_scaled_acc(pb.grad, self.grad, 1.0);
                }
            }
        };
    }
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
    auto out = make_node(a.shape(), std::vector<double>(a.size()));
    kernels::active().sub(a.size(), a.data().data(), b.data().data(), out->value.data());

    if (taping({&a, &b})) {
        out->requires_grad = true;
        out->parents = {a.node(), b.node()};
        out->backward = [](Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                add_scaled_acc(pa.grad, self.grad, 1.0);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                add_scaled_acc(pb.grad, self.grad, -1.0);
            }
        };
    }
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
    auto out = make_node(a.shape(), std::vector<double>(a.size()));
    kernels::active().mul(a.size(), a.data().data(), b.data().data(), out->value.data());

    if (taping({&a, &b})) {
        out->requires_grad = true;
        out->parents = {a.node(), b.node()};
        out->backward = [](Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            const std::size_t n = self.value.size();
            std::vector<double> tmp(n);
            if (pa.requires_grad) {
                pa.ensure_grad();
                kernels::active().mul(n, self.grad.data(), pb.value.data(), tmp.data());
                kernels::active().add(n, pa.grad.data(), tmp.data(), pa.grad.data());
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                kernels::active().mul(n, self.grad.data(), pa.value.data(), tmp.data());
                kernels::active().add(n, pb.grad.data(), tmp.data(), pb.grad.data());
            }
        };
    }
    return Tensor(out);
}

Tensor relu(const Tensor& a) {
    auto out = make_node(a.shape(), std::vector<double>(a.size()));
    kernels::active().relu(a.size(), a.data().data(), out->value.data());

    if (taping({&a})) {
        out->requires_grad = true;
        out->parents = {a.node()};
        out->backward = [](Node& self) {
            auto& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            kernels::active().relu_backward_acc(self.value.size(), pa.value.data(), self.grad.data(),
                                                pa.grad.data());
        };
    }
    return Tensor(out);
}

Tensor log_softmax(const Tensor& a) {
    if (a.rank() != 2) shape_fail("log_softmax", a.shape());
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (cols == 0) shape_fail("log_softmax", a.shape());

    auto out = make_node(a.shape(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < rows; ++i) {
        const double* x = a.data().data() + i * cols;
        double* y = out->value.data() + i * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) z += std::exp(x[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] - lse;
    }

    if (taping({&a})) {
        out->requires_grad = true;
        out->parents = {a.node()};
        out->backward = [rows, cols](Node& self) {
            auto& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < rows; ++i) {
                const double* y = self.value.data() + i * cols;
                const double* gy = self.grad.data() + i * cols;
                double* gx = pa.grad.data() + i * cols;
                const double gsum = kernels::active().sum(cols, gy);
                for (std::size_t j = 0; j < cols; ++j) {
                    gx[j] += gy[j] - std::exp(y[j]) * gsum;
                }
            }
        };
    }
    return Tensor(out);
}

Tensor sum(const Tensor& a) {
    auto out = make_node({}, {kernels::active().sum(a.size(), a.data().data())});

    if (taping({&a})) {
        out->requires_grad = true;
        out->parents = {a.node()};
        out->backward = [](Node& self) {
            auto& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const double g = self.grad[0];
            for (double& v : pa.grad) v += g;
        };
    }
    return Tensor(out);
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ContractError("mean: empty tensor");
    const double inv = 1.0 / static_cast<double>(a.size());
    auto out = make_node({}, {kernels::active().sum(a.size(), a.data().data()) * inv});

    if (taping({&a})) {
        out->requires_grad = true;
        out->parents = {a.node()};
        out->backward = [inv](Node& self) {
            auto& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const double g = self.grad[0] * inv;
            for (double& v : pa.grad) v += g;
        };
    }
    return Tensor(out);
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size()) shape_fail("dot", a.shape(), b.shape());
    auto out = make_node({}, {kernels::active().dot(a.size(), a.data().data(), b.data().data())});

    if (taping({&a, &b})) {
        out->requires_grad = true;
        out->parents = {a.node(), b.node()};
        out->backward = [](Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            const double g = self.grad[0];
            if (pa.requires_grad) {
                pa.ensure_grad();
                add_scaled_acc(pa.grad, pb.value, g);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                add_scaled_acc(pb.grad, pa.value, g);
            }
        };
    }
    return Tensor(out);
}

Tensor l2_norm(const Tensor& a) {
    if (a.rank() != 1) shape_fail("l2_norm", a.shape());
    const double sq = kernels::active().dot(a.size(), a.data().data(), a.data().data());
    const double r = std::sqrt(sq);
    auto out = make_node({}, {r});

    if (taping({&a})) {
        out->requires_grad = true;
        out->parents = {a.node()};
        out->backward = [r](Node& self) {
            auto& pa = *self.parents[0];
            if (!pa.requires_grad || r == 0.0) return;
            pa.ensure_grad();
            add_scaled_acc(pa.grad, pa.value, self.grad[0] / r);
        };
    }
    return Tensor(out);
}

Tensor scale(const Tensor& a, double s) {
    auto out = make_node(a.shape(), std::vector<double>(a.size()));
    kernels::active().scale(a.size(), a.data().data(), s, out->value.data());

    if (taping({&a})) {
        out->requires_grad = true;
        out->parents = {a.node()};
        out->backward = [s](Node& self) {
            auto& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            add_scaled_acc(pa.grad, self.grad, s);
        };
    }
    return Tensor(out);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    if (logits.rank() != 2) shape_fail("cross_entropy", logits.shape());
    const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
    if (rows == 0) throw ContractError("cross_entropy: empty batch");
    if (targets.size() != rows) {
        throw ShapeError("cross_entropy: " + std::to_string(rows) + " rows but " +
                         std::to_string(targets.size()) + " targets");
    }
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= cols) {
            throw IndexError("cross_entropy: target index " + std::to_string(t) + " out of range for " +
                             std::to_string(cols) + " classes");
        }
    }

    // cache softmax probabilities for the backward pass
    auto probs = std::make_shared<std::vector<double>>(rows * cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* x = logits.data().data() + i * cols;
        double* p = probs->data() + i * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) z += std::exp(x[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < cols; ++j) p[j] = std::exp(x[j] - lse);
        loss -= x[static_cast<std::size_t>(targets[i])] - lse;
    }
    loss /= static_cast<double>(rows);

    auto out = make_node({}, {loss});
    if (taping({&logits})) {
        out->requires_grad = true;
        out->parents = {logits.node()};
        out->backward = [probs, targets, rows, cols](Node& self) {
            auto& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const double g = self.grad[0] / static_cast<double>(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                const double* p = probs->data() + i * cols;
                double* gx = pa.grad.data() + i * cols;
                const std::size_t t = static_cast<std::size_t>(targets[i]);
                for (std::size_t j = 0; j < cols; ++j) gx[j] += g * p[j];
                gx[t] -= g;
            }
        };
    }
    return Tensor(out);
}

Tensor cosine_distance_mean(const Tensor& pred, const Tensor& target) {
    if (pred.rank() != 2 || pred.shape() != target.shape()) {
        shape_fail("cosine_distance_mean", pred.shape(), target.shape());
    }
    const std::size_t rows = pred.shape()[0], cols = pred.shape()[1];
    if (rows == 0) throw ContractError("cosine_distance_mean: empty batch");

    const auto& k = kernels::active();
    auto cos = std::make_shared<std::vector<double>>(rows);
    auto na = std::make_shared<std::vector<double>>(rows);
    auto nb = std::make_shared<std::vector<double>>(rows);
    double total = 0.0;
    std::size_t degenerate = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* a = pred.data().data() + i * cols;
        const double* b = target.data().data() + i * cols;
        const double sa = std::sqrt(k.dot(cols, a, a));
        const double sb = std::sqrt(k.dot(cols, b, b));
        (*na)[i] = sa;
        (*nb)[i] = sb;
        if (sa == 0.0 || sb == 0.0) {
            (*cos)[i] = 0.0; // orthogonality convention: distance 1
            ++degenerate;
            total += 1.0;
        } else {
            const double c = k.dot(cols, a, b) / (sa * sb);
            (*cos)[i] = c;
            total += 1.0 - c;
        }
    }
    if (degenerate > 0) {
        warn("cosine_distance_mean: " + std::to_string(degenerate) +
             " zero-norm embedding(s) treated as distance 1");
    }

    auto out = make_node({}, {total / static_cast<double>(rows)});
    if (taping({&pred})) {
        out->requires_grad = true;
        out->parents = {pred.node(), target.node()};
        out->backward = [cos, na, nb, rows, cols](Node& self) {
            auto& pa = *self.parents[0];
            const auto& pb = *self.parents[1];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const double g = self.grad[0] / static_cast<double>(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                const double sa = (*na)[i], sb = (*nb)[i];
                if (sa == 0.0 || sb == 0.0) continue;
                const double* a = pa.value.data() + i * cols;
                const double* b = pb.value.data() + i * cols;
                double* ga = pa.grad.data() + i * cols;
                // d(1-cos)/da = cos * a/|a|^2 - b/(|a||b|)
                const double ca = g * (*cos)[i] / (sa * sa);
                const double cb = -g / (sa * sb);
                kernels::active().axpy(cols, ca, a, ga);
                kernels::active().axpy(cols, cb, b, ga);
            }
        };
    }
    return Tensor(out);
}

Tensor concat_flat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_flat: no tensors given");
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();

    auto out = make_node({total}, std::vector<double>(total));
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out->value.begin() + static_cast<std::ptrdiff_t>(off));
        off += p.size();
    }

    bool any = false;
    if (g_grad_enabled) {
        for (const auto& p : parts) any = any || p.requires_grad();
    }
    if (any) {
        out->requires_grad = true;
        for (const auto& p : parts) out->parents.push_back(p.node());
        out->backward = [](Node& self) {
            std::size_t off2 = 0;
            for (auto& parent : self.parents) {
                const std::size_t n = parent->value.size();
                if (parent->requires_grad) {
                    parent->ensure_grad();
                    kernels::active().add(n, parent->grad.data(), self.grad.data() + off2, parent->grad.data());
                }
                off2 += n;
            }
        };
    }
    return Tensor(out);
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward: root must be a scalar tensor");
    }
    if (!loss.requires_grad()) return;

    // iterative post-order DFS over the requires_grad subgraph
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    auto* root = loss.node().get();
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward) {
            node->ensure_grad();
            node->backward(*node);
        }
    }
}

} // namespace dg
