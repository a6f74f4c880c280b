#pragma once

#include <cstddef>
#include <functional>

namespace frame_sampler {

/// Worker count from FRAME_SAMPLER_THREADS, else `fallback`; at least 1.
std::size_t worker_count(std::size_t fallback);

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)> &body);

} // namespace frame_sampler
