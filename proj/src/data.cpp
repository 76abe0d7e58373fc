#include "driftguard/data.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>

namespace dg {

std::pair<Tensor, std::vector<int>> TaskDataset::gather(const std::vector<std::size_t>& rows) const {
    const std::size_t d = dim();
    std::vector<double> x(rows.size() * d);
    std::vector<int> y(rows.size());
    const auto& src = inputs.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        if (r >= size()) throw IndexError("TaskDataset::gather: row " + std::to_string(r) + " out of range");
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * d), d,
                    x.begin() + static_cast<std::ptrdiff_t>(i * d));
        y[i] = labels[r];
    }
    return {Tensor::from(std::move(x), {rows.size(), d}), std::move(y)};
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& is, const std::string& path) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    if (!is) throw IoError("load_idx: truncated header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) | (std::uint32_t(buf[2]) << 8) |
           std::uint32_t(buf[3]);
}

std::vector<std::size_t> derive_permutation(std::size_t d, Rng& rng) {
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    return perm;
}

TaskDataset apply_permutation(const LabeledData& base, const std::vector<std::size_t>& perm,
                              std::size_t task_id, int n_classes) {
    const std::size_t n = base.labels.size();
    const std::size_t d = perm.size();
    std::vector<double> out(n * d);
    const auto& src = base.inputs.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = src.data() + i * d;
        double* dst = out.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] = row[perm[j]];
    }
    TaskDataset ds;
    ds.task_id = task_id;
    ds.inputs = Tensor::from(std::move(out), {n, d});
    ds.labels = base.labels;
    ds.class_map.resize(static_cast<std::size_t>(n_classes));
    std::iota(ds.class_map.begin(), ds.class_map.end(), 0);
    return ds;
}

} // namespace

LabeledData load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("load_idx: cannot open " + images_path);
    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw IoError("load_idx: cannot open " + labels_path);

    const std::uint32_t img_magic = read_u32_be(img, images_path);
    if (img_magic != kImageMagic) {
        throw IoError("load_idx: bad image magic in " + images_path + " (expected 0x803)");
    }
    const std::size_t n = read_u32_be(img, images_path);
    const std::size_t rows = read_u32_be(img, images_path);
    const std::size_t cols = read_u32_be(img, images_path);

    const std::uint32_t lbl_magic = read_u32_be(lbl, labels_path);
    if (lbl_magic != kLabelMagic) {
        throw IoError("load_idx: bad label magic in " + labels_path + " (expected 0x801)");
    }
    const std::size_t n_labels = read_u32_be(lbl, labels_path);
    if (n != n_labels) {
        throw IoError("load_idx: " + std::to_string(n) + " images but " + std::to_string(n_labels) +
                      " labels");
    }

    const std::size_t d = rows * cols;
    std::vector<unsigned char> pixel_buf(n * d);
    img.read(reinterpret_cast<char*>(pixel_buf.data()), static_cast<std::streamsize>(pixel_buf.size()));
    if (static_cast<std::size_t>(img.gcount()) != pixel_buf.size()) {
        throw IoError("load_idx: truncated image data in " + images_path);
    }
    std::vector<unsigned char> label_buf(n);
    lbl.read(reinterpret_cast<char*>(label_buf.data()), static_cast<std::streamsize>(label_buf.size()));
    if (static_cast<std::size_t>(lbl.gcount()) != label_buf.size()) {
        throw IoError("load_idx: truncated label data in " + labels_path);
    }

    LabeledData out;
    out.rows = rows;
    out.cols = cols;
    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(pixel_buf[i]) / 255.0;
    out.inputs = Tensor::from(std::move(x), {n, d});
    out.labels.assign(label_buf.begin(), label_buf.end());
    return out;
}

LabeledData downsample2x(const LabeledData& d) {
    if (d.rows % 2 != 0 || d.cols % 2 != 0 || d.rows == 0) {
        throw ConfigError("downsample2x: image sides must be even, got " + std::to_string(d.rows) + "x" +
                          std::to_string(d.cols));
    }
    const std::size_t n = d.labels.size();
    const std::size_t out_rows = d.rows / 2, out_cols = d.cols / 2;
    std::vector<double> out(n * out_rows * out_cols);
    const auto& src = d.inputs.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* img = src.data() + i * d.rows * d.cols;
        double* dst = out.data() + i * out_rows * out_cols;
        for (std::size_t r = 0; r < out_rows; ++r) {
            for (std::size_t c = 0; c < out_cols; ++c) {
                const double s = img[(2 * r) * d.cols + 2 * c] + img[(2 * r) * d.cols + 2 * c + 1] +
                                 img[(2 * r + 1) * d.cols + 2 * c] + img[(2 * r + 1) * d.cols + 2 * c + 1];
                dst[r * out_cols + c] = s * 0.25;
            }
        }
    }
    LabeledData res;
    res.rows = out_rows;
    res.cols = out_cols;
    res.inputs = Tensor::from(std::move(out), {n, out_rows * out_cols});
    res.labels = d.labels;
    return res;
}

LabeledData subset(const LabeledData& d, std::size_t n) {
    if (n == 0 || n >= d.labels.size()) return d;
    const std::size_t dim = d.inputs.shape()[1];
    std::vector<double> x(d.inputs.data().begin(),
                          d.inputs.data().begin() + static_cast<std::ptrdiff_t>(n * dim));
    LabeledData res;
    res.rows = d.rows;
    res.cols = d.cols;
    res.inputs = Tensor::from(std::move(x), {n, dim});
    res.labels.assign(d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(n));
    return res;
}

TaskStream permuted_tasks(const LabeledData& train, const LabeledData& test, std::size_t n_tasks,
                          std::uint64_t seed) {
    if (n_tasks == 0) throw ConfigError("permuted_tasks: n_tasks must be at least 1");
    if (train.inputs.shape()[1] != test.inputs.shape()[1]) {
        throw ShapeError("permuted_tasks: train and test dimensionality differ");
    }
    const std::size_t d = train.inputs.shape()[1];
    const int n_classes = 1 + *std::max_element(train.labels.begin(), train.labels.end());

    TaskStream stream;
    stream.head_policy = {HeadMode::shared, static_cast<std::size_t>(n_classes), n_tasks};

    Rng rng = Rng::stream(seed, /*tag=*/0x7065726d); // "perm"
    for (std::size_t t = 0; t < n_tasks; ++t) {
        std::vector<std::size_t> perm(d);
        std::iota(perm.begin(), perm.end(), 0);
        if (t > 0) perm = derive_permutation(d, rng);
        stream.tasks.emplace_back(apply_permutation(train, perm, t, n_classes),
                                  apply_permutation(test, perm, t, n_classes));
    }
    return stream;
}

TaskStream split_tasks(const LabeledData& train, const LabeledData& test, std::size_t classes_per_task,
                       std::uint64_t seed) {
    if (classes_per_task == 0) throw ConfigError("split_tasks: classes_per_task must be positive");
    const int max_label = *std::max_element(train.labels.begin(), train.labels.end());
    const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;
    if (n_classes % classes_per_task != 0) {
        throw ConfigError("split_tasks: " + std::to_string(n_classes) + " classes not divisible by " +
                          std::to_string(classes_per_task));
    }
    const std::size_t n_tasks = n_classes / classes_per_task;

    TaskStream stream;
    stream.head_policy = {HeadMode::per_task, classes_per_task, n_tasks};

    Rng rng = Rng::stream(seed, /*tag=*/0x73706c74); // "splt"
    const std::size_t d = train.inputs.shape()[1];

    auto build = [&](const LabeledData& base, std::size_t task, bool shuffle) {
        const int lo = static_cast<int>(task * classes_per_task);
        const int hi = static_cast<int>((task + 1) * classes_per_task);
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < base.labels.size(); ++i) {
            if (base.labels[i] >= lo && base.labels[i] < hi) rows.push_back(i);
        }
        if (shuffle) rng.shuffle(rows);
        TaskDataset ds;
        ds.task_id = task;
        std::vector<double> x(rows.size() * d);
        ds.labels.resize(rows.size());
        const auto& src = base.inputs.data();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                        x.begin() + static_cast<std::ptrdiff_t>(i * d));
            ds.labels[i] = base.labels[rows[i]] - lo;
        }
        ds.inputs = Tensor::from(std::move(x), {rows.size(), d});
        ds.class_map.resize(classes_per_task);
        std::iota(ds.class_map.begin(), ds.class_map.end(), lo);
        return ds;
    };

    for (std::size_t t = 0; t < n_tasks; ++t) {
        stream.tasks.emplace_back(build(train, t, true), build(test, t, false));
    }
    return stream;
}

TaskStream synthetic_tasks(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.dim < 2) throw ConfigError("synthetic_tasks: dim must be at least 2");
    if (spec.n_tasks == 0 || spec.classes == 0) {
        throw ConfigError("synthetic_tasks: n_tasks and classes must be positive");
    }

    TaskStream stream;
    stream.head_policy = {spec.head_mode, spec.classes, spec.n_tasks};

    Rng rng = Rng::stream(seed, /*tag=*/0x73796e74); // "synt"

    for (std::size_t t = 0; t < spec.n_tasks; ++t) {
        // rejection-sample class means at pairwise distance >= separation
        std::vector<std::vector<double>> means;
        double box = spec.separation * 2.0;
        while (means.size() < spec.classes) {
            std::vector<double> cand(spec.dim);
            for (double& v : cand) v = rng.uniform(-box, box);
            bool ok = true;
            for (const auto& m : means) {
                double sq = 0.0;
                for (std::size_t j = 0; j < spec.dim; ++j) sq += (cand[j] - m[j]) * (cand[j] - m[j]);
                if (sq < spec.separation * spec.separation) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                means.push_back(std::move(cand));
            } else {
                box *= 1.05; // widen until the means fit
            }
        }

        auto draw = [&](std::size_t per_class) {
            const std::size_t n = per_class * spec.classes;
            std::vector<double> x(n * spec.dim);
            std::vector<int> y(n);
            std::size_t row = 0;
            for (std::size_t c = 0; c < spec.classes; ++c) {
                for (std::size_t i = 0; i < per_class; ++i, ++row) {
                    for (std::size_t j = 0; j < spec.dim; ++j) {
                        x[row * spec.dim + j] = means[c][j] + rng.normal();
                    }
                    y[row] = static_cast<int>(c);
                }
            }
            // interleave classes so mini-batches stay mixed
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            rng.shuffle(order);
            std::vector<double> xs(n * spec.dim);
            std::vector<int> ys(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(order[i] * spec.dim), spec.dim,
                            xs.begin() + static_cast<std::ptrdiff_t>(i * spec.dim));
                ys[i] = y[order[i]];
            }
            return std::pair<std::vector<double>, std::vector<int>>{std::move(xs), std::move(ys)};
        };

        auto make_ds = [&](std::size_t per_class) {
            auto [x, y] = draw(per_class);
            TaskDataset ds;
            ds.task_id = t;
            const std::size_t n = y.size();
            ds.inputs = Tensor::from(std::move(x), {n, spec.dim});
            ds.labels = std::move(y);
            ds.class_map.resize(spec.classes);
            std::iota(ds.class_map.begin(), ds.class_map.end(), 0);
            return ds;
        };

        TaskDataset train_ds = make_ds(spec.train_per_class);
        TaskDataset test_ds = make_ds(spec.test_per_class);
        stream.tasks.emplace_back(std::move(train_ds), std::move(test_ds));
    }
    return stream;
}

} // namespace dg
