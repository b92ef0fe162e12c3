#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace newscls {

// SplitMix64 finalizer. Used to derive independent stream seeds from
// structured keys; never used as a generator on its own.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ mix64(value));
}

// FNV-1a, 64-bit. Stable across platforms; used for feature hashing and
// for folding strings into seeds.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Random stream with platform-independent draws. std::mt19937_64 is fully
// specified by the standard; the distributions are not, so the two helpers
// below are implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform() < p); }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::iter_swap(first + (i - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace newscls
