#pragma once

#include <cstddef>
#include <functional>

namespace glocal {

/// Worker count: GLOCAL_THREADS if set (>= 1), else hardware concurrency.
std::size_t worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the worker count; callers that need determinism
/// must combine per-index results, not per-chunk ones.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace glocal
