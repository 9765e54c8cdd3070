#include <doctest.h>

#include <map>
#include <set>

#include "usforest/subsampling.hpp"

using namespace usforest;

namespace {

SubsamplePlan uniform_plan(std::size_t n, std::size_t k, std::size_t m, std::uint64_t seed) {
    SubsamplePlan p;
    p.scheme = UniformScheme{m};
    p.n = n;
    p.k = k;
    p.seed = seed;
    return p;
}

SubsamplePlan fixed_plan(std::size_t n, std::size_t k, std::size_t n_z, std::size_t n_mc,
                         std::uint64_t seed) {
    SubsamplePlan p;
    p.scheme = FixedPointScheme{n_z, n_mc, 1};
    p.n = n;
    p.k = k;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("k = n forces the full index set") {
    const auto sets = draw_uniform(uniform_plan(5, 5, 8, 3));
    for (const auto& s : sets) {
        std::set<std::uint32_t> uniq(s.begin(), s.end());
        CHECK(uniq == std::set<std::uint32_t>{0, 1, 2, 3, 4});
    }
}

TEST_CASE("uniform draws have distinct in-range members") {
    const auto sets = draw_uniform(uniform_plan(4, 2, 10, 42));
    REQUIRE(sets.size() == 10);
    for (const auto& s : sets) {
        REQUIRE(s.size() == 2);
        CHECK(s[0] != s[1]);
        CHECK(s[0] < 4);
        CHECK(s[1] < 4);
    }
}

TEST_CASE("uniform draws hit each pair with probability 1/C(5,2)") {
    const auto sets = draw_uniform(uniform_plan(5, 2, 100000, 7));
    std::map<std::pair<int, int>, int> counts;
    for (const auto& s : sets) {
        const int a = static_cast<int>(std::min(s[0], s[1]));
        const int b = static_cast<int>(std::max(s[0], s[1]));
        counts[{a, b}]++;
    }
    REQUIRE(counts.size() == 10);
    for (const auto& [pair, c] : counts) {
        CHECK(std::abs(c / 100000.0 - 0.1) < 0.01);
    }
}

TEST_CASE("uniform draws are deterministic under a fixed seed") {
    const auto a = draw_uniform(uniform_plan(50, 7, 20, 11));
    const auto b = draw_uniform(uniform_plan(50, 7, 20, 11));
    CHECK(a == b);
    const auto c = draw_uniform(uniform_plan(50, 7, 20, 12));
    CHECK(a != c);
}

TEST_CASE("fixed-point draws: k = 1 leaves only the fixed index") {
    const auto groups = draw_fixed_point(fixed_plan(10, 1, 4, 3, 5));
    REQUIRE(groups.size() == 4);
    for (const auto& g : groups) {
        for (const auto& s : g.sets) {
            REQUIRE(s.size() == 1);
            CHECK(s[0] == g.fixed_index);
        }
    }
}

TEST_CASE("fixed-point draws: k = n gives the full set in every group") {
    const auto groups = draw_fixed_point(fixed_plan(3, 3, 2, 4, 5));
    for (const auto& g : groups) {
        for (const auto& s : g.sets) {
            std::set<std::uint32_t> uniq(s.begin(), s.end());
            CHECK(uniq == std::set<std::uint32_t>{0, 1, 2});
        }
    }
}

TEST_CASE("every fixed-point set contains its fixed index with k distinct members") {
    const auto groups = draw_fixed_point(fixed_plan(30, 6, 5, 10, 21));
    std::set<std::uint32_t> fixed_seen;
    for (const auto& g : groups) {
        fixed_seen.insert(g.fixed_index);
        REQUIRE(g.sets.size() == 10);
        for (const auto& s : g.sets) {
            REQUIRE(s.size() == 6);
            std::set<std::uint32_t> uniq(s.begin(), s.end());
            CHECK(uniq.size() == 6);
            CHECK(uniq.count(g.fixed_index) == 1);
            for (auto v : uniq) CHECK(v < 30);
        }
    }
    CHECK(fixed_seen.size() == 5);  // fixed points drawn without replacement
}

TEST_CASE("plan validation") {
    CHECK_THROWS_AS(draw_uniform(uniform_plan(3, 4, 5, 1)), std::invalid_argument);
    CHECK_THROWS_AS(draw_uniform(uniform_plan(3, 0, 5, 1)), std::invalid_argument);
    CHECK_THROWS_AS(draw_uniform(uniform_plan(3, 2, 0, 1)), std::invalid_argument);
    CHECK_THROWS_AS(draw_fixed_point(fixed_plan(3, 2, 4, 5, 1)), std::invalid_argument);
    CHECK_THROWS_AS(draw_fixed_point(fixed_plan(3, 2, 1, 5, 1)), std::invalid_argument);
    // scheme mismatch
    CHECK_THROWS_AS(draw_uniform(fixed_plan(10, 2, 3, 3, 1)), std::invalid_argument);
    CHECK_THROWS_AS(draw_fixed_point(uniform_plan(10, 2, 3, 1)), std::invalid_argument);
}

TEST_CASE("enumerate_all_subsamples counts C(n,k)") {
    CHECK(enumerate_all_subsamples(4, 2).size() == 6);
    CHECK(enumerate_all_subsamples(8, 3).size() == 56);
    const auto sets = enumerate_all_subsamples(5, 5);
    REQUIRE(sets.size() == 1);
    CHECK(sets[0] == IndexSet{0, 1, 2, 3, 4});
}
