#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "driftguard/error.hpp"

namespace dg {

/// Top-2 principal components of a row-major n x d point set.
struct Pca2 {
    std::vector<double> mean;  // d
    std::vector<double> comp1; // d, unit norm
    std::vector<double> comp2; // d, unit norm, orthogonal to comp1
    double eig1 = 0.0;
    double eig2 = 0.0;

    /// (x - mean) projected onto the two components.
    std::pair<double, double> project(const std::vector<double>& x) const;
};

/// Power iteration on the mean-centered covariance, second component via
/// deflation. Deterministic: fixed internal start vectors, components
/// oriented so their largest-magnitude coordinate is positive.
Pca2 pca_top2(const std::vector<double>& data, std::size_t n, std::size_t d);

} // namespace dg
