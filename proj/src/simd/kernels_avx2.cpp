// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma
// and only entered after CPUID confirms support.

#include "kernel_table.hpp"

#include <immintrin.h>

#include <cmath>

namespace riverflow::simd::detail {

namespace {

inline double hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n)
{
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n)
{
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

inline void store_tile(double* c, __m256d acc, __m256d valpha, __m256d vbeta, bool read_c)
{
    __m256d out = _mm256_mul_pd(valpha, acc);
    if (read_c) out = _mm256_add_pd(out, _mm256_mul_pd(vbeta, _mm256_loadu_pd(c)));
    _mm256_storeu_pd(c, out);
}

// 4 rows x 8 columns register tile; each output accumulates over p in order.
inline void tile_4x8(std::size_t k, std::size_t n, const double* a, const double* b, double* c, std::size_t ldc,
                     __m256d valpha, __m256d vbeta, bool read_c)
{
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    const double* a0 = a;
    const double* a1 = a + k;
    const double* a2 = a + 2 * k;
    const double* a3 = a + 3 * k;
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * n);
        const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
        __m256d av = _mm256_broadcast_sd(a0 + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a1 + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a2 + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a3 + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    store_tile(c, c00, valpha, vbeta, read_c);
    store_tile(c + 4, c01, valpha, vbeta, read_c);
    store_tile(c + ldc, c10, valpha, vbeta, read_c);
    store_tile(c + ldc + 4, c11, valpha, vbeta, read_c);
    store_tile(c + 2 * ldc, c20, valpha, vbeta, read_c);
    store_tile(c + 2 * ldc + 4, c21, valpha, vbeta, read_c);
    store_tile(c + 3 * ldc, c30, valpha, vbeta, read_c);
    store_tile(c + 3 * ldc + 4, c31, valpha, vbeta, read_c);
}

inline void tile_1x4(std::size_t k, std::size_t n, const double* a, const double* b, double* c, __m256d valpha,
                     __m256d vbeta, bool read_c)
{
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p)
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * n), acc);
    store_tile(c, acc, valpha, vbeta, read_c);
}

inline void tile_1x1(std::size_t k, std::size_t n, const double* a, const double* b, double* c, double alpha,
                     double beta, bool read_c)
{
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[p], b[p * n], acc);
    *c = read_c ? alpha * acc + beta * *c : alpha * acc;
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a, const double* b,
               double beta, double* c, std::size_t ldc)
{
    const __m256d valpha = _mm256_set1_pd(alpha);
    const __m256d vbeta = _mm256_set1_pd(beta);
    const bool read_c = beta != 0.0;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* arow = a + i * k;
        double* crow = c + i * ldc;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) tile_4x8(k, n, arow, b + j, crow + j, ldc, valpha, vbeta, read_c);
        for (; j + 4 <= n; j += 4)
            for (std::size_t r = 0; r < 4; ++r)
                tile_1x4(k, n, arow + r * k, b + j, crow + r * ldc + j, valpha, vbeta, read_c);
        for (; j < n; ++j)
            for (std::size_t r = 0; r < 4; ++r)
                tile_1x1(k, n, arow + r * k, b + j, crow + r * ldc + j, alpha, beta, read_c);
    }
    for (; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * ldc;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) tile_1x4(k, n, arow, b + j, crow + j, valpha, vbeta, read_c);
        for (; j < n; ++j) tile_1x1(k, n, arow, b + j, crow + j, alpha, beta, read_c);
    }
}

void adam_avx2(double* p, const double* g, double* m, double* v, std::size_t n, const AdamStep& s)
{
    // No FMA here: the update matches the scalar reference bit for bit.
    const __m256d b1 = _mm256_set1_pd(s.beta1);
    const __m256d b2 = _mm256_set1_pd(s.beta2);
    const __m256d omb1 = _mm256_set1_pd(1.0 - s.beta1);
    const __m256d omb2 = _mm256_set1_pd(1.0 - s.beta2);
    const __m256d bc1 = _mm256_set1_pd(s.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(s.bias_correction2);
    const __m256d lr = _mm256_set1_pd(s.learning_rate);
    const __m256d eps = _mm256_set1_pd(s.epsilon);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, gi));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(omb2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_div_pd(mi, bc1);
        const __m256d v_hat = _mm256_div_pd(vi, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        const double g2 = g[i] * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g2;
        const double m_hat = m[i] / s.bias_correction1;
        const double v_hat = v[i] / s.bias_correction2;
        const double num = s.learning_rate * m_hat;
        p[i] -= num / (std::sqrt(v_hat) + s.epsilon);
    }
}

} // namespace

const KernelTable& avx2_table()
{
    static const KernelTable table{dot_avx2, axpy_avx2, gemm_avx2, adam_avx2};
    return table;
}

} // namespace riverflow::simd::detail
