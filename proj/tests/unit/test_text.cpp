#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "newscls/error.hpp"
#include "newscls/rng.hpp"
#include "newscls/text.hpp"

namespace newscls {
namespace {

using Tokens = std::vector<std::string>;

TEST(Tokenize, PunctuationAndCase) {
  FeaturizerConfig cfg;
  EXPECT_EQ(tokenize("Hello, world!", cfg), (Tokens{"hello", "world"}));
  EXPECT_EQ(tokenize("", cfg), Tokens{});
  EXPECT_EQ(tokenize("  \n\t ", cfg), Tokens{});
}

TEST(Tokenize, KeepsCaseWhenAsked) {
  FeaturizerConfig cfg;
  cfg.lowercase = false;
  EXPECT_EQ(tokenize("Hello World", cfg), (Tokens{"Hello", "World"}));
}

TEST(Tokenize, UnicodeLowercaseAndPunctuation) {
  FeaturizerConfig cfg;
  EXPECT_EQ(tokenize("ÉTÉ «Привет» \u2014 ΑΘΗΝΑ…", cfg),
            (Tokens{"été", "привет", "αθηνα"}));
  EXPECT_EQ(tokenize("Zürich,Łódź", cfg), (Tokens{"zürich", "łódź"}));
}

TEST(Tokenize, TruncatesKeepingPrefix) {
  FeaturizerConfig cfg;
  cfg.max_tokens = 512;
  std::string text;
  for (int i = 0; i < 600; ++i) text += fmt::format("t{} ", i);
  const auto tokens = tokenize(text, cfg);
  ASSERT_EQ(tokens.size(), 512u);
  EXPECT_EQ(tokens.front(), "t0");
  EXPECT_EQ(tokens.back(), "t511");
}

TEST(Tokenize, InvalidUtf8IsSeparator) {
  FeaturizerConfig cfg;
  EXPECT_EQ(tokenize("ab\xff" "cd", cfg), (Tokens{"ab", "cd"}));
}

double norm(const SparseVector& v) {
  double s = 0;
  for (double x : v.value) s += x * x;
  return std::sqrt(s);
}

TEST(Featurize, UnitNormAndDeterminism) {
  FeaturizerConfig cfg;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Tokens t;
    const auto n = 1 + rng.below(30);
    for (std::size_t j = 0; j < n; ++j) t.push_back(fmt::format("w{}", rng.below(10)));
    const auto v = featurize(t, cfg);
    EXPECT_NEAR(norm(v), 1.0, 1e-12);
    EXPECT_EQ(v, featurize(t, cfg));
    for (std::size_t k = 1; k < v.index.size(); ++k) {
      ASSERT_LT(v.index[k - 1], v.index[k]);
    }
  }
  EXPECT_TRUE(featurize({}, cfg).empty());
}

TEST(Featurize, HashMatchesDocumentedFunction) {
  FeaturizerConfig cfg;
  cfg.hash_dim = 1u << 10;
  cfg.ngram_max = 2;
  const auto v = featurize({"a", "b"}, cfg);
  std::vector<std::uint32_t> expected = {
      static_cast<std::uint32_t>(fnv1a64("a") & 1023),
      static_cast<std::uint32_t>(fnv1a64("b") & 1023),
      static_cast<std::uint32_t>(fnv1a64("a b") & 1023)};
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(v.index, expected);
  for (double x : v.value) EXPECT_NEAR(x, 1 / std::sqrt(3.0), 1e-15);
}

TEST(Featurize, RepeatedTokensAccumulate) {
  FeaturizerConfig cfg;
  cfg.ngram_max = 1;
  const auto v = featurize({"x", "x", "y"}, cfg);
  ASSERT_EQ(v.nnz(), 2u);
  const auto ix = feature_index("x", cfg.hash_dim);
  for (std::size_t i = 0; i < v.nnz(); ++i) {
    const double expected = v.index[i] == ix ? 2 / std::sqrt(5.0) : 1 / std::sqrt(5.0);
    EXPECT_NEAR(v.value[i], expected, 1e-15);
  }
}

TEST(Featurize, NeverReadsPastMaxTokens) {
  FeaturizerConfig cfg;
  cfg.max_tokens = 3;
  EXPECT_EQ(featurize({"a", "b", "c", "d", "e"}, cfg),
            featurize({"a", "b", "c"}, cfg));
}

TEST(FeaturizerConfig, Validation) {
  FeaturizerConfig cfg;
  cfg.hash_dim = 1000;
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg.hash_dim = 1u << 9;
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg.hash_dim = 1u << 10;
  EXPECT_NO_THROW(validate(cfg));
  cfg.ngram_min = 3;
  cfg.ngram_max = 2;
  EXPECT_THROW(validate(cfg), ValidationError);
}

}  // namespace
}  // namespace newscls
