#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace newscls {

struct FeaturizerConfig {
  std::uint32_t hash_dim = 1u << 20;  // power of two, at least 2^10
  int ngram_min = 1;
  int ngram_max = 2;
  bool lowercase = true;
  std::size_t max_tokens = 512;

  friend bool operator==(const FeaturizerConfig&,
                         const FeaturizerConfig&) = default;
};

// Throws ValidationError when an invariant does not hold.
void validate(const FeaturizerConfig& cfg);

// Sparse feature vector with strictly increasing indices.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  bool empty() const { return index.empty(); }
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

// Splits on whitespace and punctuation (ASCII, Latin-1, general and CJK
// punctuation blocks), optionally lowercases Latin, Greek and Cyrillic, and
// keeps at most cfg.max_tokens tokens. Invalid UTF-8 bytes are treated as
// separators.
std::vector<std::string> tokenize(std::string_view text,
                                  const FeaturizerConfig& cfg);

// Hashes every word n-gram (tokens joined by a single space) with 64-bit
// FNV-1a, reduced mod hash_dim, accumulates counts and L2-normalizes.
// Reads at most cfg.max_tokens tokens.
SparseVector featurize(const std::vector<std::string>& tokens,
                       const FeaturizerConfig& cfg);

inline SparseVector featurize_text(std::string_view text,
                                   const FeaturizerConfig& cfg) {
  return featurize(tokenize(text, cfg), cfg);
}

std::uint32_t feature_index(std::string_view ngram, std::uint32_t hash_dim);

}  // namespace newscls
