#pragma once

// Static-partition parallel loop.  Each index writes only its own output slot,
// so results are identical for any worker count.

#include <cstdlib>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

namespace usforest {

inline std::size_t& thread_count_ref() {
    static std::size_t count = 0;  // 0 = not yet resolved
    return count;
}

inline void set_threads(std::size_t n) { thread_count_ref() = n; }

inline std::size_t default_threads() {
    std::size_t n = thread_count_ref();
    if (n > 0) return n;
    if (const char* env = std::getenv("USFOREST_THREADS")) {
        const long v = std::atol(env);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

template <class F>
void parallel_for(std::size_t begin, std::size_t end, F&& body) {
    const std::size_t count = end > begin ? end - begin : 0;
    if (count == 0) return;
    std::size_t workers = default_threads();
    if (workers > count) workers = count;
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = lo + chunk < end ? lo + chunk : end;
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace usforest
