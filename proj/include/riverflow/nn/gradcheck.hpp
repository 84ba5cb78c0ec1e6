#pragma once

#include "riverflow/nn/layers.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace riverflow::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t probes = 0;
    std::string worst; ///< "<param name>[index]" of the largest error
};

/// Compares analytic gradients with central differences at `probes` randomly
/// chosen parameter entries. `compute_grads` must zero and then fill
/// Param::grad; `loss` must be a deterministic function of the parameter
/// values. Relative error is |a - n| / max(|a| + |n|, floor).
GradCheckResult check_gradients(const std::function<double()>& loss, const std::function<void()>& compute_grads,
                                const std::vector<Param*>& params, std::size_t probes, std::uint64_t seed,
                                double step = 1e-5, double floor = 1e-6);

} // namespace riverflow::nn
