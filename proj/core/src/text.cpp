#include "newscls/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "newscls/error.hpp"
#include "newscls/rng.hpp"

namespace newscls {

namespace {

// Decodes one code point at `pos`, advancing it. Returns U+FFFD for
// malformed sequences (one byte consumed).
char32_t decode(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  int len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++pos;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + len > s.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (int i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_separator(char32_t c) {
  if (c < 0x80) {
    return c <= 0x20 || c == 0x7F ||
           (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  if (c == 0xFFFD) return true;
  // Latin-1 controls, NBSP and punctuation/symbols (keeps ª µ º).
  if (c >= 0x80 && c <= 0xBF) return c != 0xAA && c != 0xB5 && c != 0xBA;
  if (c == 0xD7 || c == 0xF7) return true;
  if (c == 0x037E || c == 0x0387) return true;          // Greek ; and ·
  if (c >= 0x055A && c <= 0x055F) return true;          // Armenian marks
  if (c == 0x0589 || c == 0x05BE) return true;
  if (c == 0x10FB) return true;                         // Georgian ჻
  if (c == 0x1680) return true;
  if (c >= 0x2000 && c <= 0x206F) return true;          // spaces, quotes, dashes
  if (c >= 0x20A0 && c <= 0x20CF) return true;          // currency
  if (c >= 0x2E00 && c <= 0x2E7F) return true;
  if (c >= 0x3000 && c <= 0x303F) return true;          // CJK punctuation
  if (c == 0xFEFF) return true;
  if (c >= 0xFF01 && c <= 0xFF0F) return true;          // fullwidth ASCII punct
  if (c >= 0xFF1A && c <= 0xFF20) return true;
  if (c >= 0xFF3B && c <= 0xFF40) return true;
  if (c >= 0xFF5B && c <= 0xFF65) return true;
  return false;
}

char32_t to_lower(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 0x20 : c;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  // Latin Extended-A pairs (Polish, German, French diacritics).
  if ((c >= 0x0100 && c <= 0x0137) || (c >= 0x014A && c <= 0x0177)) {
    return (c % 2 == 0) ? c + 1 : c;
  }
  if ((c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E)) {
    return (c % 2 == 1) ? c + 1 : c;
  }
  if (c == 0x0178) return 0xFF;
  // Greek.
  if (c == 0x0386) return 0x03AC;
  if (c >= 0x0388 && c <= 0x038A) return c + 0x25;
  if (c == 0x038C) return 0x03CC;
  if (c == 0x038E || c == 0x038F) return c + 0x3F;
  if (c >= 0x0391 && c <= 0x03AB && c != 0x03A2) return c + 0x20;
  // Cyrillic.
  if (c >= 0x0400 && c <= 0x040F) return c + 0x50;
  if (c >= 0x0410 && c <= 0x042F) return c + 0x20;
  // Georgian Mtavruli -> Mkhedruli.
  if (c >= 0x1C90 && c <= 0x1CBA) return c - 0x1C90 + 0x10D0;
  if (c >= 0x1CBD && c <= 0x1CBF) return c - 0x1C90 + 0x10D0;
  return c;
}

bool is_power_of_two(std::uint32_t x) { return x != 0 && (x & (x - 1)) == 0; }

}  // namespace

void validate(const FeaturizerConfig& cfg) {
  if (!is_power_of_two(cfg.hash_dim) || cfg.hash_dim < (1u << 10)) {
    throw ValidationError(fmt::format(
        "hash_dim must be a power of two >= 1024, got {}", cfg.hash_dim));
  }
  if (cfg.ngram_min < 1 || cfg.ngram_max < cfg.ngram_min) {
    throw ValidationError(fmt::format("invalid n-gram range {}-{}",
                                      cfg.ngram_min, cfg.ngram_max));
  }
  if (cfg.max_tokens == 0) throw ValidationError("max_tokens must be positive");
}

std::vector<std::string> tokenize(std::string_view text,
                                  const FeaturizerConfig& cfg) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size() && tokens.size() < cfg.max_tokens) {
    const char32_t c = decode(text, pos);
    if (is_separator(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    encode(cfg.lowercase ? to_lower(c) : c, current);
  }
  if (!current.empty() && tokens.size() < cfg.max_tokens) {
    tokens.push_back(std::move(current));
  }
  return tokens;
}

std::uint32_t feature_index(std::string_view ngram, std::uint32_t hash_dim) {
  return static_cast<std::uint32_t>(fnv1a64(ngram) & (hash_dim - 1));
}

SparseVector featurize(const std::vector<std::string>& tokens,
                       const FeaturizerConfig& cfg) {
  const std::size_t n = std::min(tokens.size(), cfg.max_tokens);
  std::map<std::uint32_t, double> counts;
  std::string gram;
  for (int order = cfg.ngram_min; order <= cfg.ngram_max; ++order) {
    const auto k = static_cast<std::size_t>(order);
    for (std::size_t i = 0; i + k <= n; ++i) {
      gram.clear();
      for (std::size_t j = 0; j < k; ++j) {
        if (j) gram.push_back(' ');
        gram += tokens[i + j];
      }
      counts[feature_index(gram, cfg.hash_dim)] += 1.0;
    }
  }
  SparseVector v;
  v.index.reserve(counts.size());
  v.value.reserve(counts.size());
  double sq = 0.0;
  for (const auto& [idx, count] : counts) sq += count * count;
  const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
  for (const auto& [idx, count] : counts) {
    v.index.push_back(idx);
    v.value.push_back(count * inv);
  }
  return v;
}

}  // namespace newscls
