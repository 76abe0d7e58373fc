#include "driftguard/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dg {

namespace {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-limit, limit);
    return Tensor::from(std::move(w), {fan_in, fan_out}).set_requires_grad(true);
}

void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

std::uint64_t double_bits(double d) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(d));
    std::memcpy(&u, &d, 8);
    return u;
}

double bits_double(std::uint64_t u) {
    double d;
    std::memcpy(&d, &u, 8);
    return d;
}

} // namespace

Network::Network(std::size_t input_dim, std::vector<std::size_t> hidden, HeadPolicy policy, Rng& init_rng)
    : input_dim_(input_dim), hidden_(std::move(hidden)), policy_(policy) {
    if (input_dim_ == 0) throw ConfigError("Network: input_dim must be positive");
    if (policy_.classes_per_head == 0) throw ConfigError("Network: classes_per_head must be positive");
    const std::size_t n_heads = policy_.mode == HeadMode::shared ? 1 : policy_.n_tasks;
    if (n_heads == 0) throw ConfigError("Network: per-task policy needs at least one task");

    std::size_t in = input_dim_;
    for (std::size_t width : hidden_) {
        if (width == 0) throw ConfigError("Network: hidden width must be positive");
        Affine layer;
        layer.w = glorot_uniform(in, width, init_rng);
        layer.b = Tensor::zeros({width}).set_requires_grad(true);
        layers_.push_back(std::move(layer));
        in = width;
    }
    for (std::size_t h = 0; h < n_heads; ++h) {
        Affine head;
        head.w = glorot_uniform(in, policy_.classes_per_head, init_rng);
        head.b = Tensor::zeros({policy_.classes_per_head}).set_requires_grad(true);
        heads_.push_back(std::move(head));
    }
    rebuild_param_list();
}

void Network::rebuild_param_list() {
    params_.clear();
    for (auto& l : layers_) {
        params_.push_back(l.w);
        params_.push_back(l.b);
    }
    for (auto& h : heads_) {
        params_.push_back(h.w);
        params_.push_back(h.b);
    }
}

Tensor Network::trunk_forward(const Tensor& x) const {
    if (x.rank() != 2 || x.shape()[1] != input_dim_) {
        throw ShapeError("Network::forward: input shape " + shape_str(x.shape()) + " does not match input_dim " +
                         std::to_string(input_dim_));
    }
    Tensor h = x;
    for (const auto& layer : layers_) {
        h = relu(add(matmul(h, layer.w), layer.b));
    }
    return h;
}

const Network::Affine& Network::head_for(std::size_t task) const {
    if (policy_.mode == HeadMode::shared) return heads_[0];
    if (task >= heads_.size()) {
        throw IndexError("Network::forward: no head for task " + std::to_string(task) + " (have " +
                         std::to_string(heads_.size()) + ")");
    }
    return heads_[task];
}

ForwardResult Network::forward(const Tensor& x, std::size_t task) const {
    Tensor embedding = trunk_forward(x);
    const Affine& head = head_for(task);
    Tensor logits = add(matmul(embedding, head.w), head.b);
    return {std::move(logits), std::move(embedding)};
}

Tensor Network::embed(const Tensor& x) const { return trunk_forward(x); }

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

std::vector<double> Network::flat_params() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& p : params_) {
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return out;
}

void Network::set_flat_params(const std::vector<double>& v) {
    if (v.size() != parameter_count()) {
        throw ShapeError("set_flat_params: expected " + std::to_string(parameter_count()) + " values, got " +
                         std::to_string(v.size()));
    }
    std::size_t off = 0;
    for (auto& p : params_) {
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(off),
                  v.begin() + static_cast<std::ptrdiff_t>(off + p.size()), p.data().begin());
        off += p.size();
    }
}

std::vector<double> Network::flat_grads() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& p : params_) {
        if (p.has_grad()) {
            out.insert(out.end(), p.grad().begin(), p.grad().end());
        } else {
            out.insert(out.end(), p.size(), 0.0);
        }
    }
    return out;
}

void Network::set_flat_grads(const std::vector<double>& v) {
    if (v.size() != parameter_count()) {
        throw ShapeError("set_flat_grads: expected " + std::to_string(parameter_count()) + " values, got " +
                         std::to_string(v.size()));
    }
    std::size_t off = 0;
    for (auto& p : params_) {
        auto& g = p.grad();
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(off),
                  v.begin() + static_cast<std::ptrdiff_t>(off + p.size()), g.begin());
        off += p.size();
    }
}

void Network::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

Tensor Network::flat_params_tensor() const { return concat_flat(params_); }

Network Network::clone() const {
    Network copy;
    copy.input_dim_ = input_dim_;
    copy.hidden_ = hidden_;
    copy.policy_ = policy_;
    for (const auto& l : layers_) {
        copy.layers_.push_back({l.w.detach().set_requires_grad(true), l.b.detach().set_requires_grad(true)});
    }
    for (const auto& h : heads_) {
        copy.heads_.push_back({h.w.detach().set_requires_grad(true), h.b.detach().set_requires_grad(true)});
    }
    copy.rebuild_param_list();
    return copy;
}

void Network::save_checkpoint(const std::string& path) const {
    nlohmann::json desc;
    desc["input_dim"] = input_dim_;
    desc["hidden"] = hidden_;
    desc["head_mode"] = policy_.mode == HeadMode::shared ? "shared" : "per_task";
    desc["classes_per_head"] = policy_.classes_per_head;
    desc["n_tasks"] = policy_.n_tasks;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path);
    os << desc.dump() << '\n';
    const auto flat = flat_params();
    write_u64_le(os, flat.size());
    for (double d : flat) write_u64_le(os, double_bits(d));
    if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

Network Network::load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);
    std::string header;
    std::getline(is, header);
    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_checkpoint: bad descriptor in " + path + ": " + e.what());
    }

    HeadPolicy policy;
    policy.mode = desc.at("head_mode").get<std::string>() == "shared" ? HeadMode::shared : HeadMode::per_task;
    policy.classes_per_head = desc.at("classes_per_head").get<std::size_t>();
    policy.n_tasks = desc.at("n_tasks").get<std::size_t>();

    Rng scratch(0);
    Network net(desc.at("input_dim").get<std::size_t>(), desc.at("hidden").get<std::vector<std::size_t>>(),
                policy, scratch);

    const std::uint64_t count = read_u64_le(is);
    if (count != net.parameter_count()) {
        throw IoError("load_checkpoint: parameter count mismatch in " + path);
    }
    std::vector<double> flat(count);
    for (auto& d : flat) d = bits_double(read_u64_le(is));
    if (!is) throw IoError("load_checkpoint: truncated parameter block in " + path);
    net.set_flat_params(flat);
    return net;
}

} // namespace dg
