#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ocsfab/rng.hpp"

using ocsfab::derive_seed;
using ocsfab::Rng;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, KnownSplitmixOutput) {
    // Reference value of splitmix64 seeded with 0.
    Rng r(0);
    EXPECT_EQ(r(), 0xE220A8397B1DCDAFull);
}

TEST(Rng, DerivedSeedsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 50; ++a) {
        for (std::uint64_t b = 0; b < 50; ++b) seen.insert(derive_seed(7, a, b));
    }
    EXPECT_EQ(seen.size(), 2500u);
    EXPECT_NE(derive_seed(7, 1, 2), derive_seed(7, 2, 1));
}

TEST(Rng, UniformMoments) {
    Rng r(3);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
    Rng r(5);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal(-46.0, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, -46.0, 0.03);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 2.0, 0.03);
}

TEST(Rng, BelowCoversRangeUniformly) {
    Rng r(9);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        ++counts[v];
    }
    for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}
