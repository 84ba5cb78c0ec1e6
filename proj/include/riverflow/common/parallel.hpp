#pragma once

#include <cstddef>
#include <functional>

namespace riverflow {

/// Number of worker threads used by parallel_for when `jobs` is zero.
void set_default_jobs(std::size_t jobs);
std::size_t default_jobs();

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write results by index so the outcome does not depend on scheduling.
/// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t jobs = 0);

} // namespace riverflow
