#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dg::kernels {

/// Dense double-precision inner loops behind every tensor operation.
///
/// Each kernel exists as a portable scalar reference and, on x86-64 with
/// AVX2+FMA, a vectorized variant. The active backend is chosen once at
/// startup from the CPU features and can be forced with the environment
/// variable DRIFTGUARD_KERNELS=scalar|avx2. SIMD variants are equivalence
/// tested against the scalar reference.
///
/// GEMM conventions: C is M x N row-major, K is the contraction length.
///   nn: C (+)= A[M x K] * B[K x N]
///   nt: C (+)= A[M x K] * B[N x K]^T
///   tn: C (+)= A[K x M]^T * B[K x N]
struct Backend {
    const char* name;

    void (*add)(std::size_t n, const double* a, const double* b, double* out);
    void (*sub)(std::size_t n, const double* a, const double* b, double* out);
    void (*mul)(std::size_t n, const double* a, const double* b, double* out);
    void (*scale)(std::size_t n, const double* a, double s, double* out);
    // y += s * x
    void (*axpy)(std::size_t n, double s, const double* x, double* y);
    double (*dot)(std::size_t n, const double* a, const double* b);
    double (*sum)(std::size_t n, const double* a);
    void (*relu)(std::size_t n, const double* a, double* out);
    // gin += gout where x > 0
    void (*relu_backward_acc)(std::size_t n, const double* x, const double* gout, double* gin);
    // acc += g * g
    void (*square_acc)(std::size_t n, const double* g, double* acc);

    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool accumulate);
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool accumulate);
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool accumulate);

    // One fused Adam parameter update; bias1/bias2 are 1 - beta^t.
    void (*adam_update)(std::size_t n, double* p, const double* g, double* m, double* v,
                        double lr, double beta1, double beta2, double eps,
                        double bias1, double bias2);
};

/// Backend currently in use (set at first call, see select()).
const Backend& active();

/// Forces a backend by name ("scalar" or "avx2"). Throws ConfigError for an
/// unknown name or an unsupported CPU.
void select(const std::string& name);

/// Names of the backends usable on this machine.
std::vector<std::string> available();

const Backend& scalar_backend();

/// Null when the binary or CPU lacks AVX2/FMA support.
const Backend* avx2_backend();

} // namespace dg::kernels
