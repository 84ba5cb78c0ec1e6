#include "kernel_table.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace riverflow::simd::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a, const double* b,
                 double beta, double* c, std::size_t ldc)
{
    std::vector<double> acc(n);
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
        }
        double* crow = c + i * ldc;
        if (beta == 0.0) {
            for (std::size_t j = 0; j < n; ++j) crow[j] = alpha * acc[j];
        } else {
            for (std::size_t j = 0; j < n; ++j) crow[j] = alpha * acc[j] + beta * crow[j];
        }
    }
}

void adam_scalar(double* p, const double* g, double* m, double* v, std::size_t n, const AdamStep& s)
{
    const double one_minus_b1 = 1.0 - s.beta1;
    const double one_minus_b2 = 1.0 - s.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = s.beta1 * m[i] + one_minus_b1 * g[i];
        v[i] = s.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
        const double m_hat = m[i] / s.bias_correction1;
        const double v_hat = v[i] / s.bias_correction2;
        p[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

} // namespace

const KernelTable& scalar_table()
{
    static const KernelTable table{dot_scalar, axpy_scalar, gemm_scalar, adam_scalar};
    return table;
}

} // namespace riverflow::simd::detail
