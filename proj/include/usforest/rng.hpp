#pragma once

// Counter-based random streams.  Every consumer derives its own stream from a
// (seed, path) key, so draws are reproducible independent of scheduling order.

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace usforest {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    static RngStream derive(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> path) {
        std::uint64_t k = mix64(seed + kGolden);
        for (std::uint64_t p : path) {
            k = mix64(k ^ (p + kGolden));
        }
        return RngStream(k);
    }

    std::uint64_t next_u64() {
        counter_ += kGolden;
        return mix64(key_ + counter_);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    double next_normal(double mean = 0.0, double sd = 1.0) {
        // Box-Muller, one value per call
        const double u1 = 1.0 - next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(2.0 * M_PI * u2);
    }

    // uniform integer in [0, bound), rejection sampled
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % bound;
    }

    // k distinct indices from {0, ..., n-1} via partial Fisher-Yates over a
    // sparse pool: only touched slots are stored, so cost is O(k), not O(n)
    std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::unordered_map<std::uint32_t, std::uint32_t> pool;
        pool.reserve(2 * k);
        auto slot = [&pool](std::uint32_t i) {
            const auto it = pool.find(i);
            return it == pool.end() ? i : it->second;
        };
        std::vector<std::uint32_t> out(k);
        for (std::uint32_t i = 0; i < k; ++i) {
            const std::uint32_t j = i + static_cast<std::uint32_t>(next_below(n - i));
            out[i] = slot(j);
            pool[j] = slot(i);
        }
        return out;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace usforest
