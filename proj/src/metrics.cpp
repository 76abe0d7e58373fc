#include "driftguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dg {

RMatrix::RMatrix(std::size_t n_tasks) : n_(n_tasks), values_(n_tasks * n_tasks, 0.0), filled_(n_tasks * n_tasks, 0) {
    if (n_tasks == 0) throw ConfigError("RMatrix: need at least one task");
}

void RMatrix::set(std::size_t i, std::size_t j, double v) {
    if (i >= n_ || j >= n_) throw IndexError("RMatrix::set: index out of range");
    if (v < 0.0 || v > 1.0 || !std::isfinite(v)) {
        throw ContractError("RMatrix::set: accuracy " + std::to_string(v) + " outside [0,1]");
    }
    values_[i * n_ + j] = v;
    filled_[i * n_ + j] = 1;
}

double RMatrix::get(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw IndexError("RMatrix::get: index out of range");
    if (!filled_[i * n_ + j]) {
        throw ContractError("RMatrix::get: cell (" + std::to_string(i) + "," + std::to_string(j) +
                            ") not filled");
    }
    return values_[i * n_ + j];
}

bool RMatrix::filled(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw IndexError("RMatrix::filled: index out of range");
    return filled_[i * n_ + j] != 0;
}

std::string RMatrix::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            if (j) os << ',';
            if (filled_[i * n_ + j]) os << values_[i * n_ + j];
        }
        os << '\n';
    }
    return os.str();
}

namespace {

void require_lower_filled(const RMatrix& r, const char* who) {
    for (std::size_t i = 0; i < r.n_tasks(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            if (!r.filled(i, j)) {
                throw ContractError(std::string(who) + ": matrix incomplete at (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");
            }
        }
    }
}

} // namespace

double accuracy(const RMatrix& r) {
    require_lower_filled(r, "accuracy");
    const std::size_t n = r.n_tasks();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) total += r.get(i, j);
    }
    return total / (static_cast<double>(n) * static_cast<double>(n + 1) / 2.0);
}

double backward_transfer(const RMatrix& r) {
    require_lower_filled(r, "backward_transfer");
    const std::size_t n = r.n_tasks();
    if (n < 2) {
        warn("backward_transfer undefined for a single task; returning 0");
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) total += r.get(i, j) - r.get(j, j);
    }
    return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

double remembering(double bwt) {
    if (!std::isfinite(bwt)) throw ContractError("remembering: bwt not finite");
    return 1.0 - std::fabs(std::min(0.0, bwt));
}

double positive_bwt(double bwt) {
    if (!std::isfinite(bwt)) throw ContractError("positive_bwt: bwt not finite");
    return std::max(0.0, bwt);
}

double eval_task(const Network& net, const TaskDataset& test) {
    if (test.size() == 0) throw ContractError("eval_task: empty test set");
    NoGradGuard ng;

    const std::size_t n = test.size();
    const std::size_t chunk = 1024;
    std::size_t correct = 0;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t stop = std::min(n, start + chunk);
        rows.resize(stop - start);
        std::iota(rows.begin(), rows.end(), start);
        auto [x, y] = test.gather(rows);
        const ForwardResult out = net.forward(x, test.task_id);
        const auto& logits = out.logits.data();
        const std::size_t c = out.logits.shape()[1];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double* row = logits.data() + i * c;
            const std::size_t arg =
                static_cast<std::size_t>(std::max_element(row, row + c) - row);
            if (static_cast<int>(arg) == y[i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

} // namespace dg
