#include "newscls/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "newscls/error.hpp"

namespace newscls {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::size_t scaled_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

}  // namespace

std::string_view to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::kSynonymReplace: return "synonym_replace";
    case AugmentOp::kRandomInsert: return "random_insert";
    case AugmentOp::kRandomDelete: return "random_delete";
    case AugmentOp::kRandomSwap: return "random_swap";
    case AugmentOp::kContextualInsert: return "contextual_insert";
    case AugmentOp::kContextualSubstitute: return "contextual_substitute";
  }
  return "?";
}

AugmentOp parse_augment_op(std::string_view name) {
  for (auto op : {AugmentOp::kSynonymReplace, AugmentOp::kRandomInsert,
                  AugmentOp::kRandomDelete, AugmentOp::kRandomSwap,
                  AugmentOp::kContextualInsert,
                  AugmentOp::kContextualSubstitute}) {
    if (to_string(op) == name) return op;
  }
  throw ValidationError(fmt::format("unknown augmentation op '{}'", name));
}

bool AugmentPlan::needs_lexicon() const {
  return std::find(ops.begin(), ops.end(), AugmentOp::kSynonymReplace) !=
         ops.end();
}

bool AugmentPlan::needs_backend() const {
  return std::any_of(ops.begin(), ops.end(), [](AugmentOp op) {
    return op == AugmentOp::kContextualInsert ||
           op == AugmentOp::kContextualSubstitute;
  });
}

void validate(const AugmentPlan& plan) {
  if (!(plan.rate >= 0.0 && plan.rate <= 1.0)) {
    throw ValidationError(
        fmt::format("augmentation rate must lie in [0, 1], got {}", plan.rate));
  }
  if (plan.copies < 1) {
    throw ValidationError(
        fmt::format("augmentation copies must be >= 1, got {}", plan.copies));
  }
}

SynonymLexicon::SynonymLexicon(
    std::map<std::string, std::vector<std::string>> entries) {
  for (auto& [token, synonyms] : entries) {
    if (synonyms.empty()) {
      throw ValidationError(
          fmt::format("lexicon entry '{}' has no synonyms", token));
    }
    if (synonyms.size() == 1 && synonyms.front() == token) {
      throw ValidationError(
          fmt::format("lexicon entry '{}' lists only itself", token));
    }
    entries_.emplace(ascii_lower(token), std::move(synonyms));
  }
}

const std::vector<std::string>* SynonymLexicon::find(
    std::string_view token) const {
  const auto it = entries_.find(ascii_lower(token));
  return it == entries_.end() ? nullptr : &it->second;
}

SynonymLexicon parse_lexicon(std::string_view content,
                             std::string_view source) {
  std::map<std::string, std::vector<std::string>> entries;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ValidationError(fmt::format(
          "{}:{}: expected 'token<TAB>synonym,...'", source, line_no));
    }
    std::vector<std::string> synonyms;
    std::istringstream list(line.substr(tab + 1));
    std::string syn;
    while (std::getline(list, syn, ',')) {
      if (!syn.empty()) synonyms.push_back(syn);
    }
    auto& slot = entries[ascii_lower(line.substr(0, tab))];
    slot.insert(slot.end(), synonyms.begin(), synonyms.end());
    if (slot.empty()) {
      throw ValidationError(fmt::format("{}:{}: entry has no synonyms",
                                        source, line_no));
    }
  }
  return SynonymLexicon(std::move(entries));
}

SynonymLexicon load_lexicon(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_lexicon(ss.str(), file.string());
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const auto start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string join_words(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Tokens synonym_replace(const Tokens& tokens, const SynonymLexicon& lexicon,
                       double rate, Rng& rng) {
  Tokens out = tokens;
  if (rate <= 0.0) return out;
  for (auto& t : out) {
    const auto* synonyms = lexicon.find(t);
    if (!synonyms) continue;
    if (!rng.bernoulli(rate)) continue;
    t = (*synonyms)[rng.below(synonyms->size())];
  }
  return out;
}

Tokens random_insert(const Tokens& tokens, double rate, Rng& rng) {
  Tokens out = tokens;
  if (tokens.empty()) return out;
  const auto k = scaled_count(rate, tokens.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto source = rng.below(out.size());
    const auto slot = rng.below(out.size() + 1);
    const auto copy = out[source];
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(slot), copy);
  }
  return out;
}

Tokens random_delete(const Tokens& tokens, double rate, Rng& rng) {
  if (rate <= 0.0 || tokens.empty()) return tokens;
  Tokens out;
  for (const auto& t : tokens) {
    if (!rng.bernoulli(rate)) out.push_back(t);
  }
  if (out.empty()) out.push_back(tokens[rng.below(tokens.size())]);
  return out;
}

Tokens random_swap(const Tokens& tokens, double rate, Rng& rng) {
  Tokens out = tokens;
  if (out.size() < 2) return out;
  const auto k = scaled_count(rate, out.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto a = rng.below(out.size());
    auto b = rng.below(out.size() - 1);
    if (b >= a) ++b;
    std::swap(out[a], out[b]);
  }
  return out;
}

LabeledInstance contextual_edit(const LabeledInstance& instance,
                                FillBackend& backend, ContextualMode mode,
                                double rate, Rng& rng) {
  const auto tokens = split_words(instance.text);
  if (rate <= 0.0 || tokens.empty()) return instance;
  std::vector<bool> picked(tokens.size());
  bool any = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    picked[i] = rng.bernoulli(rate);
    any = any || picked[i];
  }
  if (!any) return instance;

  Tokens masked;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (mode == ContextualMode::kSubstitute) {
      masked.push_back(picked[i] ? std::string(kMaskToken) : tokens[i]);
    } else {
      masked.push_back(tokens[i]);
      if (picked[i]) masked.emplace_back(kMaskToken);
    }
  }
  std::vector<std::string> fills;
  try {
    fills = backend.fill(join_words(masked));
  } catch (const Error& e) {
    throw AugmentError(instance.unit_id,
                       fmt::format("contextual edit of '{}' failed: {}",
                                   instance.unit_id, e.what()));
  }
  std::size_t next = 0;
  for (auto& t : masked) {
    if (t != kMaskToken) continue;
    if (next >= fills.size()) {
      throw AugmentError(instance.unit_id,
                         fmt::format("backend returned {} fills for unit '{}'",
                                     fills.size(), instance.unit_id));
    }
    t = fills[next++];
  }
  LabeledInstance out = instance;
  out.text = join_words(masked);
  return out;
}

std::uint64_t variant_seed(std::uint64_t plan_seed, std::size_t index,
                           std::size_t copy) {
  return combine_seed(combine_seed(plan_seed, index), copy);
}

namespace {

LabeledInstance make_variant(const LabeledInstance& source, std::size_t index,
                             std::size_t copy, const AugmentPlan& plan,
                             const SynonymLexicon* lexicon,
                             FillBackend* backend) {
  Rng rng(variant_seed(plan.seed, index, copy));
  LabeledInstance current = source;
  for (const auto op : plan.ops) {
    if (op == AugmentOp::kContextualInsert ||
        op == AugmentOp::kContextualSubstitute) {
      current = contextual_edit(current, *backend,
                                op == AugmentOp::kContextualInsert
                                    ? ContextualMode::kInsert
                                    : ContextualMode::kSubstitute,
                                plan.rate, rng);
      continue;
    }
    const auto tokens = split_words(current.text);
    if (tokens.empty()) continue;
    Tokens edited;
    switch (op) {
      case AugmentOp::kSynonymReplace:
        edited = synonym_replace(tokens, *lexicon, plan.rate, rng);
        break;
      case AugmentOp::kRandomInsert:
        edited = random_insert(tokens, plan.rate, rng);
        break;
      case AugmentOp::kRandomDelete:
        edited = random_delete(tokens, plan.rate, rng);
        break;
      case AugmentOp::kRandomSwap:
        edited = random_swap(tokens, plan.rate, rng);
        break;
      default:
        break;
    }
    current.text = join_words(edited);
  }
  current.unit_id = fmt::format("{}~aug{}", source.unit_id, copy + 1);
  return current;
}

}  // namespace

Dataset augment_dataset(const Dataset& dataset, const AugmentPlan& plan,
                        const SynonymLexicon* lexicon, FillBackend* backend,
                        unsigned jobs) {
  validate(plan);
  if (plan.needs_lexicon() && lexicon == nullptr) {
    throw ValidationError("augmentation plan uses synonyms but no lexicon given");
  }
  if (plan.needs_backend() && backend == nullptr) {
    throw ValidationError(
        "augmentation plan uses contextual edits but no backend given");
  }
  const auto n = dataset.size();
  const auto copies = static_cast<std::size_t>(plan.copies);
  std::vector<LabeledInstance> variants(n * copies);

  // Backend calls are serialized; everything else runs in parallel.
  std::mutex backend_mutex;
  struct LockedBackend : FillBackend {
    FillBackend* inner;
    std::mutex* mutex;
    std::vector<std::string> fill(std::string_view text) override {
      std::lock_guard lock(*mutex);
      return inner->fill(text);
    }
  } locked;
  locked.inner = backend;
  locked.mutex = &backend_mutex;

  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_task = std::size_t(-1);
  auto worker = [&] {
    while (true) {
      const auto task = cursor.fetch_add(1);
      if (task >= n * copies) return;
      const auto i = task / copies, j = task % copies;
      try {
        variants[task] = make_variant(dataset.instances()[i], i, j, plan,
                                      lexicon, backend ? &locked : nullptr);
      } catch (...) {
        // Report the lowest failing task so errors do not depend on timing.
        std::lock_guard lock(error_mutex);
        if (task < first_error_task) {
          first_error_task = task;
          first_error = std::current_exception();
        }
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, n * copies));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<LabeledInstance> out;
  out.reserve(n * (copies + 1));
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(dataset.instances()[i]);
    for (std::size_t j = 0; j < copies; ++j) {
      out.push_back(std::move(variants[i * copies + j]));
    }
  }
  return Dataset(dataset.languages(), std::move(out), dataset.label_space());
}

}  // namespace newscls
