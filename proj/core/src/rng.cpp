#include "newscls/rng.hpp"

namespace newscls {

std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % bound);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

}  // namespace newscls
