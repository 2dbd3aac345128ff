#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "smallgeo/random.hpp"
#include "smallgeo/text.hpp"

using namespace smallgeo;

TEST(Rng, SameSeedSameSequence) {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
    Rng rng(1);
    std::vector<int> hist(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        auto k = rng.uniform_index(7);
        ASSERT_LT(k, 7u);
        ++hist[k];
    }
    // Chi-square with 6 dof; 22.46 is the 0.999 quantile.
    double chi2 = 0.0;
    for (int h : hist) chi2 += (h - n / 7.0) * (h - n / 7.0) / (n / 7.0);
    EXPECT_LT(chi2, 22.46);
}

TEST(Rng, NormalMoments) {
    Rng rng(3);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        s += v;
        s2 += v * v;
    }
    const double mean = s / n;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(s2 / n - mean * mean, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng rng(11);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    rng.shuffle(w.begin(), w.end());
    EXPECT_NE(v, w);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(v, w);
}

TEST(Rng, DerivedSeedsDiffer) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 20; ++s) {
        for (std::uint64_t t = 0; t < 20; ++t) seen.insert(derive_seed(s, t));
    }
    EXPECT_EQ(seen.size(), 400u);
    EXPECT_EQ(derive_seed(42, 1), derive_seed(42, 1));
}

TEST(Text, FormatDoubleRoundTrips) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        double v = (rng.uniform01() - 0.5) * std::pow(10.0, static_cast<int>(rng.uniform_index(20)) - 10);
        EXPECT_EQ(text::parse_double(text::format_double(v)), v);
    }
    EXPECT_EQ(text::format_double(0.25), "0.25");
    EXPECT_EQ(text::format_double(1.0), "1");
}

TEST(Text, SplitTrimJoin) {
    auto parts = text::split("a, b ,c", ',');
    ASSERT_EQ(parts.size(), 3u);
    EXPECT_EQ(text::trim(parts[1]), "b");
    EXPECT_EQ(text::join({"x", "y"}, "-"), "x-y");
    EXPECT_EQ(text::parse_int(" 12 "), 12);
}
