#include "driftguard/memory.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace dg {

namespace {

constexpr double kWeightFloor = 1e-6;

void write_f64_block(std::ofstream& os, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        os.write(reinterpret_cast<const char*>(buf), 8);
    }
}

} // namespace

Weighting weighting_from_string(const std::string& s) {
    if (s == "uniform") return Weighting::uniform;
    if (s == "frequency") return Weighting::frequency;
    if (s == "distance") return Weighting::distance;
    if (s == "pretrained_reference") return Weighting::pretrained_reference;
    throw ConfigError("unknown weighting '" + s + "'");
}

std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::uniform: return "uniform";
        case Weighting::frequency: return "frequency";
        case Weighting::distance: return "distance";
        case Weighting::pretrained_reference: return "pretrained_reference";
    }
    throw ConfigError("invalid weighting value");
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("cosine_distance: length mismatch");
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa += a[i] * a[i];
        bb += b[i] * b[i];
        ab += a[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 1.0;
    return 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
}

void ReplayMemory::commit_task(const Network& net, const TaskDataset& task, Rng& rng) {
    if (per_task_budget_ == 0) throw ConfigError("ReplayMemory: per_task_budget must be positive");
    for (const auto& e : entries_) {
        if (e.t == task.task_id) {
            throw ContractError("ReplayMemory::commit_task: task " + std::to_string(task.task_id) +
                                " already committed");
        }
    }

    std::size_t take = per_task_budget_;
    if (take > task.size()) {
        warn("memory budget " + std::to_string(per_task_budget_) + " exceeds task size " +
             std::to_string(task.size()) + "; storing the whole task");
        take = task.size();
    }
    std::vector<std::size_t> rows = rng.sample_without_replacement(task.size(), take);

    NoGradGuard ng;
    auto [batch, labels] = task.gather(rows);
    (void)labels;
    const Tensor emb = net.embed(batch);
    const std::size_t ew = emb.shape()[1];
    const std::size_t d = task.dim();

    entries_.reserve(entries_.size() + take);
    for (std::size_t i = 0; i < take; ++i) {
        MemoryEntry e;
        e.x.assign(batch.data().begin() + static_cast<std::ptrdiff_t>(i * d),
                   batch.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        e.t = task.task_id;
        e.h.assign(emb.data().begin() + static_cast<std::ptrdiff_t>(i * ew),
                   emb.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * ew));
        e.p = 1.0;
        entries_.push_back(std::move(e));
    }
}

std::vector<std::size_t> ReplayMemory::sample(std::size_t k, Rng& rng) {
    std::vector<std::size_t> drawn;
    if (entries_.empty() || k == 0) return drawn;
    std::vector<double> w(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) w[i] = entries_[i].p;
    drawn.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t idx = rng.discrete(w);
        entries_[idx].pick_count += 1;
        drawn.push_back(idx);
    }
    return drawn;
}

void ReplayMemory::reweight_frequency() {
    for (auto& e : entries_) e.p = 1.0 / (1.0 + static_cast<double>(e.pick_count));
}

void ReplayMemory::reweight_distance(const std::vector<std::size_t>& drawn,
                                     const std::vector<double>& distances) {
    if (drawn.size() != distances.size()) {
        throw ShapeError("reweight_distance: drawn/distances length mismatch");
    }
    for (std::size_t i = 0; i < drawn.size(); ++i) {
        if (distances[i] < 0.0) {
            throw ContractError("reweight_distance: negative distance " + std::to_string(distances[i]));
        }
        MemoryEntry& e = entries_.at(drawn[i]);
        e.p = distances[i] + kWeightFloor;
        e.last_distance = distances[i];
    }
}

void ReplayMemory::reweight_pretrained_reference(const Tensor& current_batch,
                                                 const std::vector<std::size_t>& drawn) {
    if (!reference_net_) {
        throw ConfigError("reweight_pretrained_reference: no reference network configured");
    }
    if (drawn.empty()) return;
    const std::size_t b = current_batch.shape()[0];
    if (b == 0) throw ContractError("reweight_pretrained_reference: empty batch");

    NoGradGuard ng;
    const Tensor batch_emb = reference_net_->embed(current_batch);
    const std::size_t ew = batch_emb.shape()[1];
    std::vector<std::vector<double>> batch_rows(b);
    for (std::size_t r = 0; r < b; ++r) {
        batch_rows[r].assign(batch_emb.data().begin() + static_cast<std::ptrdiff_t>(r * ew),
                             batch_emb.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * ew));
    }

    for (std::size_t idx : drawn) {
        MemoryEntry& e = entries_.at(idx);
        const Tensor xe = Tensor::from(e.x, {1, e.x.size()});
        const Tensor he = reference_net_->embed(xe);
        std::vector<double> phi(he.data().begin(), he.data().end());
        double acc = 0.0;
        for (std::size_t r = 0; r < b; ++r) acc += cosine_distance(phi, batch_rows[r]);
        const double mean_d = acc / static_cast<double>(b);
        e.p = mean_d + kWeightFloor;
        e.last_distance = mean_d;
    }
}

std::vector<double> ReplayMemory::normalized_weights() const {
    std::vector<double> w(entries_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].p <= 0.0) throw ContractError("ReplayMemory: nonpositive weight in entry");
        w[i] = entries_[i].p;
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

void ReplayMemory::dump(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ofstream xf(fs::path(dir) / "x.f64", std::ios::binary);
    std::ofstream hf(fs::path(dir) / "h.f64", std::ios::binary);
    if (!xf || !hf) throw IoError("ReplayMemory::dump: cannot open output files in " + dir);

    nlohmann::json index;
    index["x_file"] = "x.f64";
    index["h_file"] = "h.f64";
    index["weighting"] = to_string(weighting_);
    index["per_task_budget"] = per_task_budget_;
    nlohmann::json items = nlohmann::json::array();

    std::size_t x_off = 0, h_off = 0;
    for (const auto& e : entries_) {
        nlohmann::json item;
        item["task"] = e.t;
        item["weight"] = e.p;
        item["pick_count"] = e.pick_count;
        if (e.last_distance) item["last_distance"] = *e.last_distance;
        item["x_offset"] = x_off;
        item["x_len"] = e.x.size();
        item["h_offset"] = h_off;
        item["h_len"] = e.h.size();
        items.push_back(std::move(item));
        write_f64_block(xf, e.x);
        write_f64_block(hf, e.h);
        x_off += e.x.size();
        h_off += e.h.size();
    }
    index["entries"] = std::move(items);

    std::ofstream idx(fs::path(dir) / "index.json");
    if (!idx) throw IoError("ReplayMemory::dump: cannot write index in " + dir);
    idx << index.dump(2) << "\n";
}

} // namespace dg
