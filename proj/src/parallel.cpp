#include "kfr/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace kfr {

namespace {

int g_override = 0;

int default_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("KFR_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return n;
}

}  // namespace

int thread_count() {
    if (g_override > 0) return g_override;
    static const int n = default_threads();
    return n;
}

void set_thread_count(int n) { g_override = n > 0 ? n : 0; }

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_grain) {
    if (begin >= end) return;
    const std::size_t total = end - begin;
    const int nthreads = thread_count();
    if (nthreads <= 1 || total < 2 * min_grain) {
        fn(begin, end);
        return;
    }
    const std::size_t nchunks = std::min<std::size_t>(
        static_cast<std::size_t>(nthreads), (total + min_grain - 1) / min_grain);
    const std::size_t chunk = (total + nchunks - 1) / nchunks;
    std::vector<std::thread> workers;
    workers.reserve(nchunks);
    for (std::size_t c = 0; c < nchunks; ++c) {
        const std::size_t lo = begin + c * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& w : workers) w.join();
}

}  // namespace kfr
