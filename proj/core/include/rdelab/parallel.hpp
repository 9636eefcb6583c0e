#pragma once

#include <cstddef>
#include <functional>

namespace rdelab {

/// Worker count: RDE_LAB_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
unsigned worker_count();

/// Runs body(begin, end) over a partition of [0, n) into contiguous blocks.
/// Results must be written to per-index slots so that the outcome does not
/// depend on scheduling. The first exception thrown by any block is
/// rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace rdelab
