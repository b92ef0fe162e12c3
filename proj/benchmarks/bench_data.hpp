#pragma once

#include <cstddef>
#include <string>

#include "newscls/corpus.hpp"

namespace newscls::bench {

LabelSpace space(LabelKind kind, std::size_t labels);

// Synthetic text of `words` tokens drawn from a 500-word vocabulary.
std::string text(std::size_t words, std::uint64_t seed);

// Each instance carries one label (multiclass) or one to three (multilabel).
Dataset dataset(const LabelSpace& space, std::size_t instances,
                std::size_t words);

LabelMap random_labels(const LabelSpace& space, std::size_t units,
                       std::uint64_t seed);

}  // namespace newscls::bench
