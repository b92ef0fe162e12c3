#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "newscls/backend.hpp"
#include "newscls/corpus.hpp"
#include "newscls/rng.hpp"

namespace newscls {

enum class AugmentOp {
  kSynonymReplace,
  kRandomInsert,
  kRandomDelete,
  kRandomSwap,
  kContextualInsert,
  kContextualSubstitute,
};

std::string_view to_string(AugmentOp op);
AugmentOp parse_augment_op(std::string_view name);

struct AugmentPlan {
  std::vector<AugmentOp> ops;
  double rate = 0.1;  // fraction of eligible tokens touched per op
  int copies = 1;     // augmented variants per original instance
  std::uint64_t seed = 0;

  bool needs_lexicon() const;
  bool needs_backend() const;
};

void validate(const AugmentPlan& plan);

// token -> synonyms. Keys are lowercase; lookups lowercase ASCII letters.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;
  explicit SynonymLexicon(std::map<std::string, std::vector<std::string>> entries);

  // Null when the token has no entry.
  const std::vector<std::string>* find(std::string_view token) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

// TSV `token<TAB>synonym1,synonym2,...`; lines starting with # are comments.
SynonymLexicon parse_lexicon(std::string_view content,
                             std::string_view source = "<memory>");
SynonymLexicon load_lexicon(const std::filesystem::path& file);

// Augmentation works on whitespace-delimited tokens so that punctuation and
// casing survive; variants are re-joined with single spaces.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& tokens);

using Tokens = std::vector<std::string>;

// Each in-lexicon token is replaced with probability `rate` by a uniformly
// drawn synonym.
Tokens synonym_replace(const Tokens& tokens, const SynonymLexicon& lexicon,
                       double rate, Rng& rng);
// round(rate * n) insertions of a copy of a random token at a random slot.
Tokens random_insert(const Tokens& tokens, double rate, Rng& rng);
// Each token dropped with probability `rate`; never returns an empty list.
Tokens random_delete(const Tokens& tokens, double rate, Rng& rng);
// round(rate * n) swaps of two distinct random positions.
Tokens random_swap(const Tokens& tokens, double rate, Rng& rng);

enum class ContextualMode { kInsert, kSubstitute };

// Each position is picked with probability `rate`. Substitute masks the
// picked token; insert places a mask after it. All masks are filled in one
// backend request with its top-1 candidates. No request is made when no
// position is picked. Backend failures surface as AugmentError.
LabeledInstance contextual_edit(const LabeledInstance& instance,
                                FillBackend& backend, ContextualMode mode,
                                double rate, Rng& rng);

// Stream for variant `copy` of instance `index`.
std::uint64_t variant_seed(std::uint64_t plan_seed, std::size_t index,
                           std::size_t copy);

// Originals followed by plan.copies variants per original (variant j of
// instance i directly after its source, ids `<id>~aug<j>`). Results do not
// depend on `jobs`.
Dataset augment_dataset(const Dataset& dataset, const AugmentPlan& plan,
                        const SynonymLexicon* lexicon = nullptr,
                        FillBackend* backend = nullptr, unsigned jobs = 1);

}  // namespace newscls
