#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace newscls {

enum class Subtask { kS1, kS2, kS3 };
enum class LabelKind { kMulticlass, kMultilabel };

std::string_view to_string(Subtask subtask);
std::string_view to_string(LabelKind kind);

// Accepts "S1", "s1", "1" and "subtask1" (likewise for 2 and 3).
Subtask parse_subtask(std::string_view text);
LabelKind parse_label_kind(std::string_view text);

// Number of labels and kind fixed by each subtask: genre (3, multiclass),
// framing (14, multilabel), persuasion techniques (23, multilabel).
std::size_t expected_label_count(Subtask subtask);
LabelKind expected_kind(Subtask subtask);

// S1 and S2 classify whole articles; S3 classifies paragraphs.
inline bool is_paragraph_level(Subtask subtask) {
  return subtask == Subtask::kS3;
}

// Ordered label inventory. A space bound to a subtask is validated against
// that subtask's cardinality and kind; an unbound space only requires
// distinct labels (used for synthetic corpora and scorer tests).
class LabelSpace {
 public:
  LabelSpace() = default;
  LabelSpace(LabelKind kind, std::vector<std::string> labels,
             std::optional<Subtask> subtask = std::nullopt);

  static LabelSpace for_subtask(Subtask subtask,
                                std::vector<std::string> labels) {
    return LabelSpace(expected_kind(subtask), std::move(labels), subtask);
  }

  std::optional<Subtask> subtask() const { return subtask_; }
  LabelKind kind() const { return kind_; }
  bool multilabel() const { return kind_ == LabelKind::kMultilabel; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_[i]; }

  std::optional<std::size_t> index_of(std::string_view label) const;
  bool contains(std::string_view label) const {
    return index_of(label).has_value();
  }

  friend bool operator==(const LabelSpace& a, const LabelSpace& b) {
    return a.subtask_ == b.subtask_ && a.kind_ == b.kind_ &&
           a.labels_ == b.labels_;
  }

 private:
  std::optional<Subtask> subtask_;
  LabelKind kind_ = LabelKind::kMulticlass;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Document {
  std::string id;
  std::string language;
  std::vector<std::string> paragraphs;

  friend bool operator==(const Document&, const Document&) = default;
};

using LabelSet = std::set<std::string>;

struct LabeledInstance {
  std::string unit_id;
  std::string text;
  LabelSet labels;

  friend bool operator==(const LabeledInstance&,
                         const LabeledInstance&) = default;
};

// Unlabeled classification unit, e.g. from a test subset.
struct Unit {
  std::string unit_id;
  std::string text;

  friend bool operator==(const Unit&, const Unit&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  // Validates labels against the space and unit id uniqueness.
  Dataset(std::set<std::string> languages,
          std::vector<LabeledInstance> instances, LabelSpace label_space);

  std::optional<Subtask> subtask() const { return label_space_.subtask(); }
  const std::set<std::string>& languages() const { return languages_; }
  const std::vector<LabeledInstance>& instances() const { return instances_; }
  const LabelSpace& label_space() const { return label_space_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.languages_ == b.languages_ && a.instances_ == b.instances_ &&
           a.label_space_ == b.label_space_;
  }

 private:
  std::set<std::string> languages_;
  std::vector<LabeledInstance> instances_;
  LabelSpace label_space_;
};

struct SplitConfig {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

using LabelMap = std::map<std::string, LabelSet>;

// Paragraph unit id: "<article_id>#<1-based index>".
std::string paragraph_unit_id(std::string_view article_id,
                              std::size_t paragraph_index);

// Splits text into paragraphs on runs of blank (whitespace-only) lines and
// trims each paragraph.
std::vector<std::string> split_paragraphs(std::string_view text);

// Reads every `article<ID>.txt` in `dir`, ordered by ID (numeric IDs
// numerically, others lexicographically after them).
std::vector<Document> parse_documents(const std::filesystem::path& dir,
                                      std::string_view language);

LabelMap parse_labels(const std::filesystem::path& file,
                      const LabelSpace& space);
LabelMap parse_labels_text(std::string_view content, const LabelSpace& space,
                           std::string_view source = "<memory>");

LabelSpace load_label_space(const std::filesystem::path& file);
LabelSpace parse_label_space(std::string_view content,
                             std::string_view source = "<memory>");

struct BindResult {
  Dataset dataset;
  std::size_t dropped = 0;  // units without a label row
};

BindResult bind(const std::vector<Document>& documents,
                const LabelMap& labels, const LabelSpace& space);

// Classification units of the documents without labels, in document order.
std::vector<Unit> units_of(const std::vector<Document>& documents,
                           Subtask subtask);

std::pair<Dataset, Dataset> split(const Dataset& dataset,
                                  const SplitConfig& cfg);

Dataset merge_multilingual(const std::vector<Dataset>& datasets);

// Dataset directory layout: `articles/article<ID>.txt`, `labels.tsv`,
// `labelspace.tsv` and `languages.txt`. Paragraph-level datasets keep their
// original paragraph indices; positions without an instance are written as
// a placeholder paragraph with no label row, which `bind` drops on reload.
// Datasets whose unit ids do not map onto article files (merged or
// augmented data) are written as `instances.jsonl` instead.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

std::string format_label_space(const LabelSpace& space);
void write_label_space(const LabelSpace& space,
                       const std::filesystem::path& file);

// One TSV row per unit in the label-file format of the subtask.
std::string format_label_row(std::string_view unit_id, const LabelSet& labels,
                             const LabelSpace& space);

}  // namespace newscls
