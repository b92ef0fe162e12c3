#include "bench_data.hpp"

#include <utility>
#include <vector>

#include "newscls/rng.hpp"

namespace newscls::bench {

LabelSpace space(LabelKind kind, std::size_t labels) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < labels; ++i) names.push_back("L" + std::to_string(i));
  return LabelSpace(kind, std::move(names));
}

std::string text(std::size_t words, std::uint64_t seed) {
  Rng rng(seed);
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += i % 17 == 0 ? ". " : " ";
    out += "w" + std::to_string(rng.below(500));
  }
  return out;
}

LabelSet draw(const LabelSpace& space, Rng& rng) {
  LabelSet labels;
  const auto n = space.kind() == LabelKind::kMulticlass ? 1 : 1 + rng.below(3);
  while (labels.size() < n) labels.insert(space.labels()[rng.below(space.size())]);
  return labels;
}

Dataset dataset(const LabelSpace& space, std::size_t instances,
                std::size_t words) {
  Rng rng(7);
  std::vector<LabeledInstance> out;
  for (std::size_t i = 0; i < instances; ++i) {
    out.push_back({"u" + std::to_string(i), text(words, i), draw(space, rng)});
  }
  return Dataset({"en"}, std::move(out), space);
}

LabelMap random_labels(const LabelSpace& space, std::size_t units,
                       std::uint64_t seed) {
  Rng rng(seed);
  LabelMap out;
  for (std::size_t i = 0; i < units; ++i) out["u" + std::to_string(i)] = draw(space, rng);
  return out;
}

}  // namespace newscls::bench
