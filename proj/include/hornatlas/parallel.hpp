#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace hornatlas {

/// Worker count: HORNATLAS_THREADS if set and positive, else the hardware
/// concurrency.
inline unsigned thread_count()
{
    if (const char* env = std::getenv("HORNATLAS_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<unsigned>(n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Run fn(i) for i in [0, n) across threads in contiguous blocks. Results must
/// be written to disjoint locations; the partition is deterministic but fn
/// must not depend on execution order.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = thread_count())
{
    if (n == 0) return;
    if (threads <= 1 || n < 2 * threads) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace hornatlas
