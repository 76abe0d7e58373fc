#include "driftguard/pca.hpp"

#include <algorithm>
#include <cmath>

#include "driftguard/rng.hpp"

namespace dg {

namespace {

double norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

void orient(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
        for (double& x : v) x = -x;
    }
}

} // namespace

std::pair<double, double> Pca2::project(const std::vector<double>& x) const {
    if (x.size() != mean.size()) throw ShapeError("Pca2::project: dimension mismatch");
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = x[i] - mean[i];
        a += c * comp1[i];
        b += c * comp2[i];
    }
    return {a, b};
}

Pca2 pca_top2(const std::vector<double>& data, std::size_t n, std::size_t d) {
    if (n == 0 || d == 0) throw ContractError("pca_top2: empty input");
    if (data.size() != n * d) throw ShapeError("pca_top2: data length != n*d");

    Pca2 out;
    out.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out.mean[j] += data[i * d + j];
    }
    for (double& m : out.mean) m /= static_cast<double>(n);

    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;

    // covariance-times-vector without materializing the covariance
    auto cov_mul = [&](const std::vector<double>& v) {
        std::vector<double> result(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double w = 0.0;
            for (std::size_t j = 0; j < d; ++j) w += (data[i * d + j] - out.mean[j]) * v[j];
            if (w == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) result[j] += (data[i * d + j] - out.mean[j]) * w;
        }
        for (double& x : result) x /= denom;
        return result;
    };

    auto power = [&](const std::vector<double>* deflate, double deflate_eig, std::uint64_t tag,
                     double& eig_out) {
        Rng rng = Rng::stream(0x70636132, tag);
        std::vector<double> v(d);
        for (double& x : v) x = rng.normal();
        if (deflate) { // keep the start vector out of the first component
            double along = 0.0;
            for (std::size_t j = 0; j < d; ++j) along += v[j] * (*deflate)[j];
            for (std::size_t j = 0; j < d; ++j) v[j] -= along * (*deflate)[j];
        }
        double nv = norm(v);
        if (nv == 0.0) {
            v.assign(d, 0.0);
            v[deflate ? (d > 1 ? 1 : 0) : 0] = 1.0;
            nv = 1.0;
        }
        for (double& x : v) x /= nv;

        double eig = 0.0;
        for (std::size_t it = 0; it < 1000; ++it) {
            std::vector<double> w = cov_mul(v);
            if (deflate) {
                double along = 0.0;
                for (std::size_t j = 0; j < d; ++j) along += (*deflate)[j] * v[j];
                for (std::size_t j = 0; j < d; ++j) w[j] -= deflate_eig * (*deflate)[j] * along;
                // re-orthogonalize against accumulated round-off
                double drift = 0.0;
                for (std::size_t j = 0; j < d; ++j) drift += (*deflate)[j] * w[j];
                for (std::size_t j = 0; j < d; ++j) w[j] -= drift * (*deflate)[j];
            }
            const double wn = norm(w);
            if (wn < 1e-300) { // (deflated) covariance annihilates v: no variance left
                eig = 0.0;
                break;
            }
            double diff = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double nxt = w[j] / wn;
                diff = std::max(diff, std::fabs(nxt - v[j]));
                v[j] = nxt;
            }
            eig = wn;
            if (diff < 1e-13) break;
        }
        eig_out = eig;
        return v;
    };

    out.comp1 = power(nullptr, 0.0, 1, out.eig1);
    orient(out.comp1);
    out.comp2 = power(&out.comp1, out.eig1, 2, out.eig2);
    orient(out.comp2);
    return out;
}

} // namespace dg
