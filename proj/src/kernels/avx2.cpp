// AVX2+FMA variants of the kernel set. Compiled with -mavx2 -mfma; only
// reachable through the dispatch table after a runtime CPU check.

#include "driftguard/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define DG_HAVE_AVX2_BUILD 1
#else
#define DG_HAVE_AVX2_BUILD 0
#endif

#if DG_HAVE_AVX2_BUILD

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace dg::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

void add_v(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_v(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_v(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_v(std::size_t n, const double* a, double s, double* out) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
    }
    for (; i < n; ++i) out[i] = a[i] * s;
}

void axpy_v(std::size_t n, double s, const double* x, double* y) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_fmadd_pd(vs, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, acc);
    }
    for (; i < n; ++i) y[i] += s * x[i];
}

double dot_v(std::size_t n, const double* a, const double* b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

double sum_v(std::size_t n, const double* a) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i];
    return r;
}

void relu_v(std::size_t n, const double* a, double* out) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
    }
    for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward_acc_v(std::size_t n, const double* x, const double* gout, double* gin) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        __m256d g = _mm256_and_pd(_mm256_loadu_pd(gout + i), mask);
        _mm256_storeu_pd(gin + i, _mm256_add_pd(_mm256_loadu_pd(gin + i), g));
    }
    for (; i < n; ++i) {
        if (x[i] > 0.0) gin[i] += gout[i];
    }
}

void square_acc_v(std::size_t n, const double* g, double* acc) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(vg, vg, _mm256_loadu_pd(acc + i)));
    }
    for (; i < n; ++i) acc[i] += g[i] * g[i];
}

// Row-of-C accumulation: C[i,:] += A[i,p] * B[p,:]. Streams B rows with two
// unrolled FMA lanes; remainder handled scalar.
void gemm_nn_v(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(arow[p]);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256d c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j));
                __m256d c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 4), _mm256_loadu_pd(crow + j + 4));
                _mm256_storeu_pd(crow + j, c0);
                _mm256_storeu_pd(crow + j + 4, c1);
            }
            for (; j + 4 <= n; j += 4) {
                _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
            }
            const double as = arow[p];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void gemm_nt_v(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot_v(k, arow, b + j * k);
            crow[j] = accumulate ? crow[j] + v : v;
        }
    }
}

void gemm_tn_v(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const __m256d av = _mm256_set1_pd(arow[i]);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
            }
            const double as = arow[i];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void adam_update_v(std::size_t n, double* p, const double* g, double* m, double* v,
                   double lr, double beta1, double beta2, double eps,
                   double bias1, double bias2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vone_b1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vone_b2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d vbias1 = _mm256_set1_pd(bias1);
    const __m256d vbias2 = _mm256_set1_pd(bias2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_fmadd_pd(vone_b1, vg, _mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)));
        __m256d vv = _mm256_fmadd_pd(vone_b2, _mm256_mul_pd(vg, vg), _mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_div_pd(vm, vbias1);
        const __m256d vhat = _mm256_div_pd(vv, vbias2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Backend* avx2_backend() {
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
    static const Backend backend = {
        "avx2",
        add_v, sub_v, mul_v, scale_v, axpy_v, dot_v, sum_v,
        relu_v, relu_backward_acc_v, square_acc_v,
        gemm_nn_v, gemm_nt_v, gemm_tn_v,
        adam_update_v,
    };
    return &backend;
}

} // namespace dg::kernels

#else // !DG_HAVE_AVX2_BUILD

namespace dg::kernels {
const Backend* avx2_backend() { return nullptr; }
} // namespace dg::kernels

#endif
