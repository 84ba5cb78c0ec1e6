#include "riverflow/simd/kernels.hpp"

#include "kernel_table.hpp"
#include "riverflow/common/error.hpp"

#include <atomic>
#include <string>
#include <vector>

namespace riverflow::simd {

namespace {

Backend detect_backend() { return avx2_supported() ? Backend::avx2 : Backend::scalar; }

std::atomic<Backend>& backend_slot()
{
    static std::atomic<Backend> slot{detect_backend()};
    return slot;
}

const detail::KernelTable& table()
{
#if RIVERFLOW_HAVE_AVX2
    if (backend_slot().load(std::memory_order_relaxed) == Backend::avx2) return detail::avx2_table();
#endif
    return detail::scalar_table();
}

// Copies op(X) (rows x cols) into a contiguous row-major buffer unless it already is one.
const double* pack(Trans trans, std::size_t rows, std::size_t cols, const double* x, std::size_t ld,
                   std::vector<double>& scratch)
{
    if (trans == Trans::no && ld == cols) return x;
    scratch.resize(rows * cols);
    if (trans == Trans::no) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) scratch[r * cols + c] = x[r * ld + c];
    } else {
        // op(X)[r][c] = X[c][r]
        for (std::size_t c = 0; c < cols; ++c) {
            const double* src = x + c * ld;
            for (std::size_t r = 0; r < rows; ++r) scratch[r * cols + c] = src[r];
        }
    }
    return scratch.data();
}

} // namespace

bool avx2_supported()
{
#if RIVERFLOW_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported;
#else
    return false;
#endif
}

Backend active_backend() { return backend_slot().load(); }

void set_backend(Backend backend)
{
    if (backend == Backend::avx2 && !avx2_supported()) throw InputError("AVX2/FMA kernels are not available on this CPU");
    backend_slot().store(backend);
}

std::string_view backend_name(Backend backend) { return backend == Backend::avx2 ? "avx2" : "scalar"; }

Backend parse_backend(std::string_view name)
{
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    if (name == "auto") return detect_backend();
    throw InputError("unknown SIMD backend '" + std::string(name) + "'");
}

double dot(std::span<const double> a, std::span<const double> b)
{
    require(a.size() == b.size(), "dot: length mismatch");
    return table().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    require(x.size() == y.size(), "axpy: length mismatch");
    table().axpy(alpha, x.data(), y.data(), x.size());
}

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc)
{
    if (m == 0 || n == 0) return;
    if (k == 0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == 0.0 ? 0.0 : beta * c[i * ldc + j];
        return;
    }
    thread_local std::vector<double> scratch_a;
    thread_local std::vector<double> scratch_b;
    const double* pa = pack(trans_a, m, k, a, lda, scratch_a);
    const double* pb = pack(trans_b, k, n, b, ldb, scratch_b);
    table().gemm_packed(m, n, k, alpha, pa, pb, beta, c, ldc);
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamStep& step)
{
    require(param.size() == grad.size() && param.size() == m.size() && param.size() == v.size(),
            "adam_update: length mismatch");
    table().adam(param.data(), grad.data(), m.data(), v.data(), param.size(), step);
}

} // namespace riverflow::simd
