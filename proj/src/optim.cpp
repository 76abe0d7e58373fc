#include "driftguard/optim.hpp"

#include <cmath>
#include <string>

#include "driftguard/kernels.hpp"

namespace dg {

Optimizer::Optimizer(OptimKind kind, double lr, std::size_t param_count)
    : kind_(kind), lr_(lr), param_count_(param_count) {
    if (!(lr > 0.0)) throw ConfigError("Optimizer: learning rate must be positive");
    if (kind_ == OptimKind::adam) {
        m_.assign(param_count_, 0.0);
        v_.assign(param_count_, 0.0);
    }
}

void Optimizer::step(Network& net) {
    if (net.parameter_count() != param_count_) {
        throw ShapeError("Optimizer::step: network has " + std::to_string(net.parameter_count()) +
                         " parameters, optimizer was built for " + std::to_string(param_count_));
    }

    std::size_t off = 0;
    for (auto& p : net.parameters()) {
        const auto& g = p.grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw NumericError("Optimizer::step: non-finite gradient at flat index " +
                                   std::to_string(off + i));
            }
        }
        off += g.size();
    }

    const auto& k = kernels::active();
    if (kind_ == OptimKind::sgd) {
        for (auto& p : net.parameters()) {
            k.axpy(p.size(), -lr_, p.grad().data(), p.data().data());
        }
        ++step_count_;
        return;
    }

    ++step_count_;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count_));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count_));
    off = 0;
    for (auto& p : net.parameters()) {
        k.adam_update(p.size(), p.data().data(), p.grad().data(), m_.data() + off, v_.data() + off,
                      lr_, kBeta1, kBeta2, kEps, bias1, bias2);
        off += p.size();
    }
}

void Optimizer::reset() {
    step_count_ = 0;
    if (kind_ == OptimKind::adam) {
        std::fill(m_.begin(), m_.end(), 0.0);
        std::fill(v_.begin(), v_.end(), 0.0);
    }
}

} // namespace dg
