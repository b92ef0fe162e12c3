#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "newscls/rng.hpp"

namespace newscls {
namespace {

TEST(Rng, FnvKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.below(1000003), b.below(1000003));
}

TEST(Rng, BelowInRangeAndRoughlyUniform) {
  Rng rng(7);
  std::map<std::uint64_t, int> counts;
  for (int i = 0; i < 60000; ++i) {
    const auto x = rng.below(6);
    ASSERT_LT(x, 6u);
    ++counts[x];
  }
  for (const auto& [_, c] : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(9);
  double sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 10000, 0.5, 0.02);
}

TEST(Rng, BernoulliEdges) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    EXPECT_FALSE(rng.bernoulli(0.0));
    EXPECT_TRUE(rng.bernoulli(1.0));
  }
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w.begin(), w.end());
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, CombineSeedSeparatesKeys) {
  EXPECT_NE(combine_seed(1, 2), combine_seed(2, 1));
  EXPECT_NE(combine_seed(0, 0), combine_seed(0, 1));
  EXPECT_EQ(combine_seed(5, 6), combine_seed(5, 6));
}

}  // namespace
}  // namespace newscls
