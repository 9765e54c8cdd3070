#include <doctest.h>

#include <cmath>
#include <map>

#include "usforest/rng.hpp"

using namespace usforest;

TEST_CASE("derived streams are deterministic and path-sensitive") {
    RngStream a = RngStream::derive(42, {1, 2});
    RngStream b = RngStream::derive(42, {1, 2});
    RngStream c = RngStream::derive(42, {2, 1});
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() == b.next_u64());
    CHECK(RngStream::derive(42, {1, 2}).next_u64() != c.next_u64());
}

TEST_CASE("next_double lies in [0,1) and is roughly uniform") {
    RngStream rng = RngStream::derive(7, {0});
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.next_double();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        sum += v;
    }
    CHECK(std::fabs(sum / n - 0.5) < 0.01);
}

TEST_CASE("next_normal has the requested moments") {
    RngStream rng = RngStream::derive(11, {3});
    const int n = 200000;
    double sum = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.next_normal(2.0, 3.0);
        sum += v;
        ss += v * v;
    }
    const double mean = sum / n;
    const double var = ss / n - mean * mean;
    CHECK(std::fabs(mean - 2.0) < 0.05);
    CHECK(std::fabs(var - 9.0) < 0.2);
}

TEST_CASE("sample_without_replacement yields distinct indices in range") {
    RngStream rng = RngStream::derive(5, {1});
    for (int rep = 0; rep < 100; ++rep) {
        auto s = rng.sample_without_replacement(10, 4);
        REQUIRE(s.size() == 4);
        std::map<std::uint32_t, int> seen;
        for (auto v : s) {
            REQUIRE(v < 10);
            seen[v]++;
        }
        REQUIRE(seen.size() == 4);
    }
}

TEST_CASE("next_below rejects zero bound") {
    RngStream rng(1);
    CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}
