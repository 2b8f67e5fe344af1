#pragma once

#include <cstddef>
#include <functional>

namespace kfr {

// Number of worker threads used by parallel_for. Defaults to the hardware
// concurrency, capped by the KFR_THREADS environment variable when set.
int thread_count();

// Overrides the thread count for this process (0 restores the default).
void set_thread_count(int n);

// Splits [begin, end) into contiguous chunks and runs fn(chunk_begin,
// chunk_end) on worker threads. Falls back to a serial call when the range
// is small or only one thread is available. Chunks write disjoint outputs,
// so results do not depend on the thread count.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_grain = 1024);

}  // namespace kfr
