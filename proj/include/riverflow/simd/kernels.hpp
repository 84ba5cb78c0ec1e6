#pragma once

// Dense arithmetic kernels used by the network engine and the PCA code.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is picked once at startup from CPUID and can
// be pinned with set_backend(). gemm accumulates every output over k in the
// same order on both paths, so the two agree to FMA rounding; dot uses
// lane-wise partial sums on the vector path. adam_update is bit-identical.

#include <cstddef>
#include <span>
#include <string_view>

namespace riverflow::simd {

enum class Backend { scalar, avx2 };

enum class Trans { no, yes };

bool avx2_supported();
Backend active_backend();
/// Throws InputError when the backend is not supported on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);
Backend parse_backend(std::string_view name);

double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// C = alpha * op(A) * op(B) + beta * C with row-major storage.
/// op(A) is M x K, op(B) is K x N, C is M x N. When beta == 0, C is not read.
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);

struct AdamStep {
    double learning_rate; ///< already decayed
    double beta1;
    double beta2;
    double epsilon;
    double bias_correction1; ///< 1 - beta1^t
    double bias_correction2; ///< 1 - beta2^t
};

/// In-place Adam update of `param` given `grad` and moment buffers.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamStep& step);

} // namespace riverflow::simd
