#pragma once

#include <cstddef>
#include <functional>

namespace ntssl {

/// Worker count: NTSSL_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) over contiguous chunks on up to worker_count()
/// threads. fn must only write to per-index state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ntssl
