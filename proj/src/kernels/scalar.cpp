#include "driftguard/kernels.hpp"

#include <cmath>
#include <cstring>

namespace dg::kernels {
namespace {

void add_s(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_s(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_s(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_s(std::size_t n, const double* a, double s, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy_s(std::size_t n, double s, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

double dot_s(std::size_t n, const double* a, const double* b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_s(std::size_t n, const double* a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

void relu_s(std::size_t n, const double* a, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward_acc_s(std::size_t n, const double* x, const double* gout, double* gin) {
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > 0.0) gin[i] += gout[i];
    }
}

void square_acc_s(std::size_t n, const double* g, double* acc) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += g[i] * g[i];
}

void gemm_nn_s(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt_s(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot_s(k, arow, b + j * k);
            crow[j] = accumulate ? crow[j] + v : v;
        }
    }
}

void gemm_tn_s(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void adam_update_s(std::size_t n, double* p, const double* g, double* m, double* v,
                   double lr, double beta1, double beta2, double eps,
                   double bias1, double bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Backend& scalar_backend() {
    static const Backend backend = {
        "scalar",
        add_s, sub_s, mul_s, scale_s, axpy_s, dot_s, sum_s,
        relu_s, relu_backward_acc_s, square_acc_s,
        gemm_nn_s, gemm_nt_s, gemm_tn_s,
        adam_update_s,
    };
    return backend;
}

} // namespace dg::kernels
