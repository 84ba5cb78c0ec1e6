#pragma once

#include "riverflow/simd/kernels.hpp"

namespace riverflow::simd::detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    /// Packed product: C(MxN) = alpha * A(MxK) * B(KxN) + beta * C, A and B contiguous row-major.
    void (*gemm_packed)(std::size_t, std::size_t, std::size_t, double, const double*, const double*, double,
                        double*, std::size_t);
    void (*adam)(double*, const double*, double*, double*, std::size_t, const AdamStep&);
};

const KernelTable& scalar_table();
#if RIVERFLOW_HAVE_AVX2
const KernelTable& avx2_table();
#endif

} // namespace riverflow::simd::detail
