#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dcr {

/// Number of worker threads used by the parallel loops (hardware concurrency, at least 1).
inline unsigned worker_count() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

/**
 * Runs fn(begin, end) over a static partition of [0, n) into `blocks`
 * contiguous ranges. The partition depends only on n and blocks, never on
 * the thread count, so callers that reduce per-block results in block order
 * get bitwise reproducible output.
 */
template <class Fn>
void parallel_blocks(std::size_t n, std::size_t blocks, Fn&& fn) {
    if (n == 0)
        return;
    blocks = std::clamp<std::size_t>(blocks, 1, n);
    auto range = [&](std::size_t b) {
        return std::pair<std::size_t, std::size_t>{b * n / blocks, (b + 1) * n / blocks};
    };
    const std::size_t threads = std::min<std::size_t>(worker_count(), blocks);
    if (threads <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) {
            auto [lo, hi] = range(b);
            fn(b, lo, hi);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t b = t; b < blocks; b += threads) {
                    auto [lo, hi] = range(b);
                    fn(b, lo, hi);
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

/// Independent iterations; each index must write only its own output.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    parallel_blocks(n, std::max<std::size_t>(1, worker_count() * 4), [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k)
            fn(k);
    });
}

}  // namespace dcr
