#include "driftguard/qpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dg {

namespace {

void check_qp(const NnQp& qp) {
    if (qp.T == 0) throw ContractError("solve_nnqp: T must be at least 1");
    if (qp.b.size() != qp.T || qp.Q.size() != qp.T * qp.T) {
        throw ShapeError("solve_nnqp: Q must be TxT and b length T");
    }
    for (std::size_t i = 0; i < qp.T; ++i) {
        for (std::size_t j = i + 1; j < qp.T; ++j) {
            if (std::fabs(qp.Q[i * qp.T + j] - qp.Q[j * qp.T + i]) > 1e-10) {
                throw ContractError("solve_nnqp: Q not symmetric at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
            }
        }
    }
}

std::vector<double> matvec(const NnQp& qp, const std::vector<double>& v) {
    std::vector<double> out(qp.T, 0.0);
    for (std::size_t i = 0; i < qp.T; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < qp.T; ++j) acc += qp.Q[i * qp.T + j] * v[j];
        out[i] = acc;
    }
    return out;
}

bool kkt_ok(const std::vector<double>& v, const std::vector<double>& grad, double tol) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (grad[i] < -tol) return false;
        if (v[i] * grad[i] > tol) return false;
    }
    return true;
}

} // namespace

double qp_objective(const NnQp& qp, const std::vector<double>& v) {
    const std::vector<double> qv = matvec(qp, v);
    double obj = 0.0;
    for (std::size_t i = 0; i < qp.T; ++i) obj += 0.5 * v[i] * qv[i] + qp.b[i] * v[i];
    return obj;
}

QpResult solve_nnqp(const NnQp& qp, double tol, std::size_t max_iter) {
    check_qp(qp);
    if (tol <= 0.0) throw ConfigError("solve_nnqp: tol must be positive");

    const std::size_t n = qp.T;

    // conservative initial step from the row-sum bound on ||Q||
    double qnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += std::fabs(qp.Q[i * n + j]);
        qnorm = std::max(qnorm, row);
    }
    const double alpha0 = 1.0 / std::max(qnorm, 1e-12);

    std::vector<double> v(n, 0.0);
    std::vector<double> grad = qp.b; // Q*0 + b

    std::vector<double> best_v = v;
    double best_obj = 0.0; // objective at v = 0

    QpResult res;
    double alpha = alpha0;

    for (std::size_t it = 0; it < max_iter; ++it) {
        if (kkt_ok(v, grad, tol)) {
            // the KKT certificate belongs to this iterate, so return it even if
            // the non-monotone BB path grazed a noise-level-better objective
            res.v = v;
            res.converged = true;
            res.iterations = it;
            res.objective = qp_objective(qp, v);
            return res;
        }

        std::vector<double> v_next(n);
        for (std::size_t i = 0; i < n; ++i) v_next[i] = std::max(0.0, v[i] - alpha * grad[i]);
        const std::vector<double> grad_next = [&] {
            std::vector<double> g = matvec(qp, v_next);
            for (std::size_t i = 0; i < n; ++i) g[i] += qp.b[i];
            return g;
        }();

        // Barzilai-Borwein step length for the next move
        double ss = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = v_next[i] - v[i];
            const double y = grad_next[i] - grad[i];
            ss += s * s;
            sy += s * y;
        }
        alpha = (sy > 1e-300 && ss > 0.0) ? ss / sy : alpha0;

        v = std::move(v_next);
        grad = grad_next;

        const double obj = qp_objective(qp, v);
        if (obj < best_obj) {
            best_obj = obj;
            best_v = v;
        }
    }

    res.v = best_v;
    res.converged = false;
    res.iterations = max_iter;
    res.objective = best_obj;
    return res;
}

} // namespace dg
