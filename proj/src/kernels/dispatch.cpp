#include "driftguard/kernels.hpp"

#include <cstdlib>

#include "driftguard/error.hpp"

namespace dg::kernels {
namespace {

const Backend* pick_default() {
    if (const char* env = std::getenv("DRIFTGUARD_KERNELS")) {
        const std::string name(env);
        if (name == "scalar") return &scalar_backend();
        if (name == "avx2") {
            if (const Backend* b = avx2_backend()) return b;
            throw ConfigError("DRIFTGUARD_KERNELS=avx2 but this CPU lacks AVX2/FMA");
        }
        throw ConfigError("DRIFTGUARD_KERNELS: unknown backend '" + name + "'");
    }
    if (const Backend* b = avx2_backend()) return b;
    return &scalar_backend();
}

const Backend*& current() {
    static const Backend* backend = pick_default();
    return backend;
}

} // namespace

const Backend& active() { return *current(); }

void select(const std::string& name) {
    if (name == "scalar") {
        current() = &scalar_backend();
        return;
    }
    if (name == "avx2") {
        if (const Backend* b = avx2_backend()) {
            current() = b;
            return;
        }
        throw ConfigError("kernels::select: AVX2/FMA not supported on this CPU");
    }
    throw ConfigError("kernels::select: unknown backend '" + name + "'");
}

std::vector<std::string> available() {
    std::vector<std::string> names = {"scalar"};
    if (avx2_backend() != nullptr) names.emplace_back("avx2");
    return names;
}

} // namespace dg::kernels
