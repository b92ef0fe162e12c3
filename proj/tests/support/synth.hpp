#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "newscls/corpus.hpp"
#include "newscls/rng.hpp"

namespace newscls::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "newscls");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const {
    return path_ / rel;
  }

 private:
  std::filesystem::path path_;
};

std::filesystem::path config_dir();
std::filesystem::path echo_backend_path();

// Shipped label space of a subtask.
LabelSpace official_space(Subtask subtask);
// Unbound space with labels L0..L{n-1}.
LabelSpace custom_space(LabelKind kind, std::size_t n);

// Cue word of a label; texts carrying it are separable by keyword.
std::string cue_word(const std::string& label);

// Filler text plus two cue words per gold label.
std::string keyword_text(const LabelSet& labels, const std::string& language,
                         Rng& rng);

// Multiclass: per_label instances of each class. Multilabel: per_label *
// size instances with one or two labels each.
Dataset keyword_corpus(const LabelSpace& space, std::size_t per_label,
                       std::uint64_t seed, const std::string& language = "en");

// Arbitrary dataset with n instances and random label sets; ids are
// distinct but otherwise unconstrained.
Dataset random_dataset(const LabelSpace& space, std::size_t n, Rng& rng,
                       const std::string& language = "en");

// Complete gold and prediction maps over n units. Multilabel sets may be
// empty.
std::pair<LabelMap, LabelMap> random_label_maps(const LabelSpace& space,
                                                std::size_t n, Rng& rng);

struct DeskSpec {
  std::vector<std::string> languages{"en", "fr", "ge", "it", "po", "ru"};
  std::vector<std::string> surprise{"ka", "gr", "es"};
  std::size_t train_units = 50;
  std::size_t dev_units = 15;
  std::size_t test_units = 15;
  std::uint64_t seed = 1;
};

// Raw data tree for every subtask (train/dev for training languages,
// labeled test for all) and an experiment config next to it. Returns the
// config path.
std::filesystem::path write_desk_experiment(const std::filesystem::path& root,
                                            const DeskSpec& spec);

}  // namespace newscls::testing
