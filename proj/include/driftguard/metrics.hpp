#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "driftguard/data.hpp"
#include "driftguard/model.hpp"

namespace dg {

/// values[i][j] = test accuracy on task j measured right after training on
/// task i finished; filled row by row as the run progresses.
class RMatrix {
public:
    RMatrix() = default;
    explicit RMatrix(std::size_t n_tasks);

    std::size_t n_tasks() const { return n_; }
    void set(std::size_t i, std::size_t j, double v);
    double get(std::size_t i, std::size_t j) const;
    bool filled(std::size_t i, std::size_t j) const;

    /// One line per row, comma-separated; unfilled cells stay empty.
    std::string to_csv() const;

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
    std::vector<char> filled_;
};

/// Mean of R over the diagonal and below: sum_{i>=j} R[i][j] / (N(N+1)/2).
double accuracy(const RMatrix& r);

/// Mean change on earlier tasks: sum_{i>j} (R[i][j]-R[j][j]) / (N(N-1)/2).
/// A single task has no earlier tasks; returns 0 with a warning.
double backward_transfer(const RMatrix& r);

double remembering(double bwt);
double positive_bwt(double bwt);

/// Fraction of argmax-correct predictions on the task's own head.
double eval_task(const Network& net, const TaskDataset& test);

} // namespace dg
