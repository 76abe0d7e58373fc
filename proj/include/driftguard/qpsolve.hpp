#pragma once

#include <cstddef>
#include <vector>

#include "driftguard/error.hpp"

namespace dg {

/// min over v >= 0 of  1/2 v'Qv + b'v,  with Q a small symmetric PSD
/// Gram matrix (row-major T x T).
struct NnQp {
    std::vector<double> Q;
    std::vector<double> b;
    std::size_t T = 0;
};

struct QpResult {
    std::vector<double> v;
    bool converged = false;
    std::size_t iterations = 0;
    double objective = 0.0;
};

double qp_objective(const NnQp& qp, const std::vector<double>& v);

/// Projected gradient descent with Barzilai-Borwein steps on the
/// nonnegative orthant. Converges when the KKT residuals drop below tol:
/// grad_i >= -tol and v_i * grad_i <= tol for all i. If max_iter is hit,
/// the best iterate seen is returned with converged = false.
QpResult solve_nnqp(const NnQp& qp, double tol = 1e-9, std::size_t max_iter = 10000);

} // namespace dg
