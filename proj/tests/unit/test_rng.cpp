#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "relerr/rng.hpp"

namespace relerr {
namespace {

using Block = std::array<std::uint32_t, 4>;

TEST(Philox, ZeroCounterZeroKey) {
    EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
              (Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, AllOnes) {
    const std::uint32_t ones = 0xffffffffu;
    EXPECT_EQ(philox4x32_10({ones, ones, ones, ones}, {ones, ones}),
              (Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, PiDigits) {
    EXPECT_EQ(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u}),
              (Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterRng, DrawsFollowTheDocumentedLayout) {
    CounterRng rng(0x0000000500000007ull, 0x0000000300000002ull);
    for (std::uint64_t i = 0; i < 6; ++i) {
        const auto block = philox4x32_10({static_cast<std::uint32_t>(i / 2), 0, 2, 3}, {7, 5});
        const unsigned h = static_cast<unsigned>(i % 2);
        const std::uint64_t expected =
            static_cast<std::uint64_t>(block[2 * h]) | (static_cast<std::uint64_t>(block[2 * h + 1]) << 32);
        EXPECT_EQ(rng.next_u64(), expected) << "draw " << i;
    }
    EXPECT_EQ(rng.position(), 6u);
}

TEST(CounterRng, SameSeedAndStreamRepeat) {
    CounterRng a(42, 1), b(42, 1), c(42, 2);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        differs |= x != c.normal();
    }
    EXPECT_TRUE(differs);
}

TEST(CounterRng, UniformMoments) {
    CounterRng rng(9, 0);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(CounterRng, NormalMoments) {
    CounterRng rng(11, 4);
    const int n = 200000;
    double sum = 0.0, sq = 0.0, tail = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        ASSERT_TRUE(std::isfinite(z));
        sum += z;
        sq += z * z;
        tail += z < -1.0 ? 1.0 : 0.0;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.015);
    EXPECT_NEAR(tail / n, 0.158655, 0.004);
}

TEST(CounterRng, IndexCoversRangeUniformly) {
    CounterRng rng(3, 9);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto k = rng.index(7);
        ASSERT_LT(k, 7u);
        ++counts[k];
    }
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(DeriveSeed, DistinctTasksGiveDistinctSeeds) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(derive_seed(17, t));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(derive_seed(17, 5), derive_seed(17, 5));
    EXPECT_NE(derive_seed(17, 5), derive_seed(18, 5));
}

}  // namespace
}  // namespace relerr
