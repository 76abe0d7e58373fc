#pragma once

#include <cstddef>
#include <vector>

#include "driftguard/model.hpp"

namespace dg {

enum class OptimKind { sgd, adam };

/// SGD / Adam over a network's parameters, stepped from the accumulated
/// gradients. Adam keeps flat first/second moment vectors aligned with the
/// network's flat parameter order; reset() clears them at task boundaries.
class Optimizer {
public:
    Optimizer(OptimKind kind, double lr, std::size_t param_count);

    /// Applies one update from the parameters' accumulated gradients.
    /// Throws NumericError naming the flat index of the first non-finite
    /// gradient element.
    void step(Network& net);

    /// Zeroes Adam moments and the step counter; no-op for SGD.
    void reset();

    OptimKind kind() const { return kind_; }
    double lr() const { return lr_; }
    std::size_t step_count() const { return step_count_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    OptimKind kind_;
    double lr_;
    std::size_t param_count_;
    std::size_t step_count_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

} // namespace dg
