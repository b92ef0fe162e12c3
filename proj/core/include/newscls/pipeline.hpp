#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "newscls/augment.hpp"
#include "newscls/backend.hpp"
#include "newscls/classifier.hpp"
#include "newscls/corpus.hpp"
#include "newscls/metrics.hpp"
#include "newscls/report.hpp"

namespace newscls {

enum class Setup { kMono, kMulti, kAug };

inline constexpr std::array<Setup, 3> kAllSetups = {Setup::kMono, Setup::kMulti,
                                                    Setup::kAug};

std::string_view to_string(Setup setup);
Setup parse_setup(std::string_view name);

inline constexpr std::uint64_t kDefaultRootSeed = 20230301;

// Per-run seed from (root, subtask, language, setup, index). Multilingual
// runs pass language "*" so every language shares the same k models.
std::uint64_t derive_seed(std::uint64_t root, Subtask subtask,
                          std::string_view language, Setup setup,
                          std::size_t index);

// Training recipe per (subtask, setup). Paragraph-level multilingual and
// augmented runs use 5 epochs, k=5, length 256, batch 8; every other cell
// uses 10 epochs, k=10, length 512, batch 4.
class HyperProfile {
 public:
  static HyperProfile defaults();

  const TrainConfig& at(Subtask subtask, Setup setup) const;
  void set(Subtask subtask, Setup setup, TrainConfig cfg);
  // Applies one learning rate to every cell.
  void set_learning_rate(double lr);

 private:
  std::map<std::pair<Subtask, Setup>, TrainConfig> entries_;
};

struct RunManifest {
  static constexpr int kSchemaVersion = 1;

  Subtask subtask = Subtask::kS1;
  std::string language;
  Setup setup = Setup::kMono;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  TrainConfig train_cfg;
  FeaturizerConfig featurizer;
  std::string model_path;  // relative to the manifest's directory
  std::string measure;     // official measure used for the scores
  std::optional<double> validation_score;
  std::optional<double> dev_score;
  bool best = false;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  std::vector<double> epoch_losses;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::string created_at;  // UTC, ISO-8601
  std::string input_hash;  // SHA-256 of training inputs and validation data

  bool ok() const { return status == "ok"; }
  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// Pretty-printed JSON with schema_version. load(persist(m)) == m.
void persist_manifest(const RunManifest& m, const std::filesystem::path& file);
// Throws FormatError naming the byte offset for corrupt files and
// MigrationError for other schema versions.
RunManifest load_manifest(const std::filesystem::path& file);
RunManifest parse_manifest(std::string_view content,
                           std::string_view source = "<memory>");

// SHA-256 (hex) of the canonical serialization of a manifest.
std::string manifest_digest(const RunManifest& m);
std::string sha256_hex(std::string_view bytes);

// Digest of everything that determines one run's outcome.
std::string input_hash(const Dataset& train, const Dataset* validation,
                       const TrainConfig& train_cfg,
                       const FeaturizerConfig& featurizer, std::uint64_t seed);

// Cache of trained models keyed by training-input hash, shared by sweeps
// that train identical multilingual models for several languages.
class ModelCache {
 public:
  struct Entry {
    std::shared_ptr<const LinearModel> model;
    std::vector<double> epoch_losses;
  };
  std::optional<Entry> find(const std::string& key) const;
  void put(const std::string& key, Entry entry);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, Entry> entries_;
};

struct SweepRequest {
  Subtask subtask = Subtask::kS1;
  std::string language;
  Setup setup = Setup::kMono;
  const Dataset* train = nullptr;
  const Dataset* validation = nullptr;
  TrainConfig train_cfg;
  FeaturizerConfig featurizer;
  std::uint64_t root_seed = kDefaultRootSeed;
  // Seeds are derived with this language key ("*" for multilingual).
  std::string seed_language;
  // runs/<subtask>/<language>/<setup>/seed<k>/ is created below this
  // directory when non-empty.
  std::filesystem::path runs_dir;
  unsigned jobs = 1;
  bool tune_thresholds = false;
  ModelCache* cache = nullptr;
};

struct SweepOutcome {
  std::vector<RunManifest> manifests;  // seed order
  std::vector<std::filesystem::path> manifest_paths;
  std::vector<std::shared_ptr<const LinearModel>> models;  // null on failure
  std::size_t best_index = 0;

  const RunManifest& best() const { return manifests[best_index]; }
};

// Trains k models (k from train_cfg.k_seeds), scores each on validation with
// the official measure, and marks the best (ties go to the lowest seed
// index). Failed seeds are recorded in their manifests; throws RunError only
// when every seed fails. Results do not depend on `jobs`.
SweepOutcome run_seed_sweep(const SweepRequest& request);

// Argmax of dev scores; ties resolve in the order multi, mono, aug.
Setup select_setup(Subtask subtask, std::string_view language,
                   const std::map<Setup, double>& dev_scores);

struct SetupConstraint {
  std::optional<Setup> forced;
  // Seed selection on the merged multilingual validation set.
  bool multilingual_validation = false;
};

// Languages without training data must use the multilingual model chosen
// on multilingual validation.
SetupConstraint route_language(std::string_view language,
                               const std::set<std::string>& known_languages);

// Produces one label set per text.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<LabelSet> predict(const std::vector<std::string>& texts) = 0;
};

class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(const LinearModel& model) : model_(model) {}
  std::vector<LabelSet> predict(const std::vector<std::string>& texts) override;

 private:
  const LinearModel& model_;
};

// Uses a backend's `classify` op: argmax for multiclass spaces, scores >=
// threshold for multilabel spaces.
class BackendPredictor : public Predictor {
 public:
  BackendPredictor(BackendHandle& handle, LabelSpace space,
                   double threshold = 0.5, std::size_t batch_size = 8)
      : handle_(handle), space_(std::move(space)), threshold_(threshold),
        batch_size_(batch_size) {}
  std::vector<LabelSet> predict(const std::vector<std::string>& texts) override;

 private:
  BackendHandle& handle_;
  LabelSpace space_;
  double threshold_;
  std::size_t batch_size_;
};

// Predicts every unit and writes the label-file TSV, in unit order. Nothing
// is written when inference fails (RunError) or unit ids repeat.
LabelMap produce_predictions(Predictor& predictor, const std::vector<Unit>& units,
                             const LabelSpace& space,
                             const std::filesystem::path& out_file);

LabelMap predict_dataset(Predictor& predictor, const Dataset& dataset);

// Official-measure score of `predictor` on a labeled dataset.
double official_score(Predictor& predictor, const Dataset& dataset);

}  // namespace newscls
