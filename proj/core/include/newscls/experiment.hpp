#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "newscls/augment.hpp"
#include "newscls/backend.hpp"
#include "newscls/corpus.hpp"
#include "newscls/pipeline.hpp"

namespace newscls {

// Experiment description, read from a JSON file. Relative paths are
// resolved against the directory of the config file.
//
//   {
//     "languages": ["en", "fr", ...],          training languages
//     "surprise_languages": ["ka", ...],       test-only languages
//     "subtasks": ["S1", "S2", "S3"],
//     "setups": ["mono", "multi", "aug"],
//     "root_seed": 20230301,
//     "paths": {
//       "data_root": "data", "work_dir": "work",
//       "label_spaces": {"S1": "...", "S2": "...", "S3": "..."},
//       "lexicons": {"en": "..."}, "backend_registry": "..."
//     },
//     "split": {"train_fraction": 0.8},
//     "featurizer": {"hash_dim": 65536, "ngram_min": 1, "ngram_max": 2,
//                    "lowercase": true},
//     "learning_rate": 0.05,
//     "tune_thresholds": false,
//     "hyper_overrides": [{"subtask": "S3", "setup": "multi", "epochs": 5}],
//     "augment": {"ops": ["random_swap"], "rate": 0.1, "copies": 1,
//                 "seed": 7},
//     "backend": {"command": ["python3", "-m", "..."], "timeout_ms": 30000},
//     "run_name_prefix": "newscls"
//   }
//
// Raw data lives in <data_root>/<lang>/ as `train-articles-subtask-N/`,
// `train-labels-subtask-N.txt`, and the same for `dev` and `test` (test
// labels optional).
struct ExperimentConfig {
  std::vector<std::string> languages;
  std::vector<std::string> surprise_languages;
  std::vector<Subtask> subtasks{Subtask::kS1, Subtask::kS2, Subtask::kS3};
  std::vector<Setup> setups{Setup::kMono, Setup::kMulti, Setup::kAug};
  std::uint64_t root_seed = kDefaultRootSeed;

  std::filesystem::path data_root;
  std::filesystem::path work_dir;
  std::map<Subtask, std::filesystem::path> label_spaces;
  std::map<std::string, std::filesystem::path> lexicons;
  std::filesystem::path backend_registry;

  double train_fraction = 0.8;
  FeaturizerConfig featurizer;
  HyperProfile profile = HyperProfile::defaults();
  bool tune_thresholds = false;
  AugmentPlan augment;
  std::vector<std::string> backend_command;
  std::chrono::milliseconds backend_timeout{30000};
  std::string run_name_prefix = "newscls";

  bool is_known(std::string_view language) const;
  // Training languages followed by surprise languages.
  std::vector<std::string> all_languages() const;
};

ExperimentConfig parse_experiment_config(std::string_view content,
                                         const std::filesystem::path& base_dir,
                                         std::string_view source = "<memory>");
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

enum class Subset { kTrain, kDev, kTest };

std::string_view to_string(Subset subset);

// Setup chosen for one (subtask, language) cell.
struct Selection {
  Subtask subtask = Subtask::kS1;
  std::string language;
  Setup setup = Setup::kMulti;
  bool forced = false;
  std::map<Setup, double> dev_scores;
  // Best-seed manifest of the chosen setup, relative to the work directory.
  std::string manifest;
  std::string run_name;

  friend bool operator==(const Selection&, const Selection&) = default;
};

nlohmann::json to_json(const Selection& s);
Selection selection_from_json(const nlohmann::json& j);

struct PredictionResult {
  std::filesystem::path predictions;
  std::size_t units = 0;
  std::optional<ResultRecord> result;  // when test labels exist
};

// Stage driver over a work directory:
//   splits/<S>/<lang>/{train,validation}/ and split.json
//   augmented/<S>/<lang>/train/
//   runs/<S>/<lang>/<setup>/seed<k>/{manifest.json,model.bin}, sweep.json
//   selections/<S>/<lang>.json
//   predictions/<S>/<lang>.tsv
//   results/<S>/<lang>__<run>.json
// Each stage reads the outputs of earlier stages from disk, so any stage
// can be rerun alone.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config, unsigned jobs = 1);

  const ExperimentConfig& config() const { return config_; }
  const LabelSpace& label_space(Subtask subtask);

  std::filesystem::path articles_dir(Subtask subtask, std::string_view language,
                                     Subset subset) const;
  std::filesystem::path labels_file(Subtask subtask, std::string_view language,
                                    Subset subset) const;
  std::filesystem::path split_dir(Subtask subtask, std::string_view language) const;
  std::filesystem::path augmented_dir(Subtask subtask,
                                      std::string_view language) const;
  std::filesystem::path runs_dir() const;
  std::filesystem::path sweep_dir(Subtask subtask, std::string_view language,
                                  Setup setup) const;
  std::filesystem::path selection_file(Subtask subtask,
                                       std::string_view language) const;
  std::filesystem::path predictions_file(Subtask subtask,
                                         std::string_view language) const;
  std::filesystem::path results_dir() const;

  // Labeled raw subset. Throws IoError naming the missing path.
  Dataset load_subset(Subtask subtask, std::string_view language, Subset subset);
  bool has_labels(Subtask subtask, std::string_view language, Subset subset) const;
  std::vector<Unit> load_test_units(Subtask subtask, std::string_view language);

  std::uint64_t split_seed(Subtask subtask, std::string_view language) const;
  std::uint64_t augment_seed(Subtask subtask, std::string_view language) const;

  // 80/20 split of the raw train subset.
  std::pair<Dataset, Dataset> split_language(Subtask subtask,
                                             std::string_view language);
  std::pair<Dataset, Dataset> load_split(Subtask subtask, std::string_view language);

  // Augments the train side of the split.
  Dataset augment_language(Subtask subtask, std::string_view language);
  Dataset load_augmented(Subtask subtask, std::string_view language);

  // Training and validation data of a sweep. Multi trains on the merged
  // train splits of every training language and validates on the language's
  // own split, or on the merged validation splits for surprise languages.
  std::pair<Dataset, Dataset> sweep_data(Subtask subtask, std::string_view language,
                                         Setup setup);
  SweepOutcome sweep(Subtask subtask, std::string_view language, Setup setup);
  // Best manifest of a persisted sweep.
  std::filesystem::path best_manifest(Subtask subtask, std::string_view language,
                                      Setup setup) const;

  // Scores each setup's best seed on dev and picks the setup. Surprise
  // languages are routed to multi.
  Selection select(Subtask subtask, std::string_view language);
  Selection load_selection(Subtask subtask, std::string_view language) const;

  // Writes the predictions of the selected model on the test subset, and a
  // result record when test labels exist. With `backend`, the backend's
  // classify op replaces the built-in model.
  PredictionResult predict(Subtask subtask, std::string_view language,
                           BackendHandle* backend = nullptr);

  // Every stage for every configured cell. Returns the predictions files.
  std::vector<std::filesystem::path> run_all();

  std::string run_name(Setup setup) const;

 private:
  std::unique_ptr<BackendHandle> connect_for(std::string_view language);

  ExperimentConfig config_;
  unsigned jobs_;
  std::map<Subtask, LabelSpace> spaces_;
  ModelCache cache_;
};

}  // namespace newscls
