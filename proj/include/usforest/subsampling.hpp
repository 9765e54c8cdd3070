#pragma once

// Index-set generation for the two sampling regimes: uniform subsample draws
// and fixed-point-conditioned draws.

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "usforest/rng.hpp"

namespace usforest {

using IndexSet = std::vector<std::uint32_t>;

struct UniformScheme {
    std::size_t m = 0;  // number of subsamples
};

struct FixedPointScheme {
    std::size_t n_z = 0;   // number of fixed-point groups
    std::size_t n_mc = 0;  // subsamples per group
    std::size_t c = 1;     // fixed points per group; only c = 1 is supported
};

struct SubsamplePlan {
    std::variant<UniformScheme, FixedPointScheme> scheme;
    std::size_t k = 0;  // subsample size
    std::size_t n = 0;  // population size
    std::uint64_t seed = 0;

    bool is_fixed_point() const { return std::holds_alternative<FixedPointScheme>(scheme); }

    std::size_t total_draws() const {
        if (const auto* u = std::get_if<UniformScheme>(&scheme)) return u->m;
        const auto& fp = std::get<FixedPointScheme>(scheme);
        return fp.n_z * fp.n_mc;
    }

    void validate() const {
        if (k < 1 || k > n) throw std::invalid_argument("SubsamplePlan: need 1 <= k <= n");
        if (const auto* u = std::get_if<UniformScheme>(&scheme)) {
            if (u->m < 1) throw std::invalid_argument("SubsamplePlan: m must be >= 1");
        } else {
            const auto& fp = std::get<FixedPointScheme>(scheme);
            if (fp.c != 1) throw std::invalid_argument("SubsamplePlan: only c = 1 is supported");
            if (fp.n_z < 2) throw std::invalid_argument("SubsamplePlan: n_z must be >= 2");
            if (fp.n_mc < 1) throw std::invalid_argument("SubsamplePlan: n_mc must be >= 1");
            if (fp.n_z > n) throw std::invalid_argument("SubsamplePlan: n_z exceeds n");
        }
    }
};

// m independent size-k draws without replacement from {0..n-1}; repeated sets
// across draws are allowed.
inline std::vector<IndexSet> draw_uniform(const SubsamplePlan& plan) {
    plan.validate();
    const auto* u = std::get_if<UniformScheme>(&plan.scheme);
    if (!u) throw std::invalid_argument("draw_uniform: plan scheme is not Uniform");
    std::vector<IndexSet> out(u->m);
    for (std::size_t j = 0; j < u->m; ++j) {
        RngStream rng = RngStream::derive(plan.seed, {0x756e69ULL, j});
        out[j] = rng.sample_without_replacement(static_cast<std::uint32_t>(plan.n),
                                                static_cast<std::uint32_t>(plan.k));
    }
    return out;
}

struct FixedPointGroup {
    std::uint32_t fixed_index = 0;
    std::vector<IndexSet> sets;  // each set contains fixed_index, size k
};

// Fixed indices are drawn without replacement; within a group every set is
// {z} plus k-1 draws without replacement from the remaining indices.
inline std::vector<FixedPointGroup> draw_fixed_point(const SubsamplePlan& plan) {
    plan.validate();
    const auto* fp = std::get_if<FixedPointScheme>(&plan.scheme);
    if (!fp) throw std::invalid_argument("draw_fixed_point: plan scheme is not FixedPoint");

    RngStream fixed_rng = RngStream::derive(plan.seed, {0x66697865ULL});
    const std::vector<std::uint32_t> fixed =
        fixed_rng.sample_without_replacement(static_cast<std::uint32_t>(plan.n),
                                             static_cast<std::uint32_t>(fp->n_z));

    std::vector<FixedPointGroup> out(fp->n_z);
    for (std::size_t g = 0; g < fp->n_z; ++g) {
        out[g].fixed_index = fixed[g];
        out[g].sets.resize(fp->n_mc);
        for (std::size_t j = 0; j < fp->n_mc; ++j) {
            RngStream rng = RngStream::derive(plan.seed, {0x6d63ULL, g, j});
            IndexSet set = rng.sample_without_replacement(
                static_cast<std::uint32_t>(plan.n - 1),
                static_cast<std::uint32_t>(plan.k - 1));
            for (auto& idx : set) {
                if (idx >= fixed[g]) ++idx;  // remap around the fixed index
            }
            set.insert(set.begin(), fixed[g]);
            out[g].sets[j] = std::move(set);
        }
    }
    return out;
}

// All C(n, k) index sets in lexicographic order; oracle-scale n only.
inline std::vector<IndexSet> enumerate_all_subsamples(std::size_t n, std::size_t k) {
    if (k < 1 || k > n) throw std::invalid_argument("enumerate_all_subsamples: need 1 <= k <= n");
    std::vector<IndexSet> out;
    IndexSet cur(k);
    for (std::size_t i = 0; i < k; ++i) cur[i] = static_cast<std::uint32_t>(i);
    while (true) {
        out.push_back(cur);
        std::size_t i = k;
        while (i > 0 && cur[i - 1] == n - k + i - 1) --i;
        if (i == 0) break;
        ++cur[i - 1];
        for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
    }
    return out;
}

}  // namespace usforest
