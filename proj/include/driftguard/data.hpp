#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "driftguard/model.hpp"
#include "driftguard/rng.hpp"
#include "driftguard/tensor.hpp"

namespace dg {

/// One task's labeled data. Labels are local to the task's head;
/// class_map[local] gives the original class id.
struct TaskDataset {
    std::size_t task_id = 0;
    Tensor inputs; // N x D
    std::vector<int> labels;
    std::vector<int> class_map;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return inputs.shape()[1]; }

    /// Copies the given rows into a fresh batch tensor + label vector.
    std::pair<Tensor, std::vector<int>> gather(const std::vector<std::size_t>& rows) const;
};

/// Ordered sequence of (train, test) task datasets sharing a head policy.
struct TaskStream {
    std::vector<std::pair<TaskDataset, TaskDataset>> tasks;
    HeadPolicy head_policy;

    std::size_t n_tasks() const { return tasks.size(); }
    const TaskDataset& train(std::size_t t) const { return tasks.at(t).first; }
    const TaskDataset& test(std::size_t t) const { return tasks.at(t).second; }
};

/// Flattened image set as loaded from disk.
struct LabeledData {
    Tensor inputs; // N x D, pixel bytes scaled to [0, 1]
    std::vector<int> labels;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Reads an IDX image/label file pair (big-endian, magic 0x803/0x801).
/// Images are flattened to vectors and scaled byte/255.
LabeledData load_idx(const std::string& images_path, const std::string& labels_path);

/// 2x2 average pooling of flattened row-major images; both sides must be even.
LabeledData downsample2x(const LabeledData& d);

/// Keeps the first n samples (no-op when n == 0 or n >= size).
LabeledData subset(const LabeledData& d, std::size_t n);

/// Pixel-permutation stream: task 0 is the identity, tasks 1..n-1 apply
/// distinct seed-derived permutations to train and test alike. Shared head.
TaskStream permuted_tasks(const LabeledData& train, const LabeledData& test, std::size_t n_tasks,
                          std::uint64_t seed);

/// Consecutive-class split: task k holds original classes
/// [k*c, (k+1)*c) remapped to 0..c-1. Per-task heads. The seed only shuffles
/// the order of samples inside each task.
TaskStream split_tasks(const LabeledData& train, const LabeledData& test, std::size_t classes_per_task,
                       std::uint64_t seed);

struct SyntheticSpec {
    std::size_t n_tasks = 3;
    std::size_t dim = 16;
    std::size_t classes = 2;
    std::size_t train_per_class = 256;
    std::size_t test_per_class = 64;
    double separation = 4.0; // minimum distance between cluster means (sigma = 1)
    HeadMode head_mode = HeadMode::per_task;
};

/// Gaussian-cluster task stream with distinct class means per task;
/// deterministic under the seed.
TaskStream synthetic_tasks(const SyntheticSpec& spec, std::uint64_t seed);

} // namespace dg
