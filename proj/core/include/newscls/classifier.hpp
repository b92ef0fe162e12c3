#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "newscls/corpus.hpp"
#include "newscls/text.hpp"

namespace newscls {

struct AdamConfig {
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One training recipe. The defaults are the document-level profile; the
// learning rate is sized for a linear head, not for transformer fine-tuning
// (where 2e-5 is the usual value).
struct TrainConfig {
  int epochs = 10;
  int k_seeds = 10;
  std::size_t max_seq_len = 512;
  std::size_t batch_size = 4;
  double learning_rate = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  AdamConfig adam() const {
    return {learning_rate, adam_beta1, adam_beta2, adam_epsilon};
  }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& cfg);

// Linear head over hashed n-gram features: softmax for multiclass spaces,
// independent sigmoids for multilabel spaces. Weights are stored
// feature-major, so the num_labels() weights of one feature are contiguous.
class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(LabelSpace space, FeaturizerConfig featurizer,
              double threshold = 0.5);

  LabelKind kind() const { return space_.kind(); }
  const LabelSpace& label_space() const { return space_; }
  const FeaturizerConfig& featurizer() const { return featurizer_; }
  std::size_t num_labels() const { return space_.size(); }
  std::uint32_t hash_dim() const { return featurizer_.hash_dim; }

  // Decision threshold for multilabel prediction, optionally per label.
  double threshold() const { return threshold_; }
  double threshold_for(std::size_t label) const {
    return label_thresholds_.empty() ? threshold_ : label_thresholds_[label];
  }
  void set_threshold(double t);
  const std::vector<double>& label_thresholds() const {
    return label_thresholds_;
  }
  void set_label_thresholds(std::vector<double> thresholds);

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> bias() { return bias_; }
  std::span<const double> bias() const { return bias_; }

  double& weight(std::size_t label, std::uint32_t feature) {
    return weights_[std::size_t(feature) * num_labels() + label];
  }
  double weight(std::size_t label, std::uint32_t feature) const {
    return weights_[std::size_t(feature) * num_labels() + label];
  }

  // Raw scores W x + b.
  std::vector<double> logits(const SparseVector& x) const;

  bool all_finite() const;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;

 private:
  LabelSpace space_;
  FeaturizerConfig featurizer_;
  double threshold_ = 0.5;
  std::vector<double> label_thresholds_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// A featurized instance with label indices into the model's space.
struct Example {
  SparseVector features;
  std::vector<std::size_t> labels;  // sorted
};

Example make_example(const LabeledInstance& instance, const LabelSpace& space,
                     const FeaturizerConfig& cfg);

// Sparse gradient: dense blocks for the touched feature columns.
struct Gradient {
  std::size_t num_labels = 0;
  std::vector<std::uint32_t> columns;  // strictly increasing
  std::vector<double> values;          // columns.size() * num_labels
  std::vector<double> bias;            // num_labels

  // Expands to the flattened [weights..., bias...] layout of a model.
  std::vector<double> to_dense(std::uint32_t hash_dim) const;
};

struct LossAndGradient {
  double loss = 0.0;
  Gradient gradient;
};

// Multiclass: mean softmax cross-entropy. Multilabel: mean over instances
// of the summed per-label binary cross-entropies. Throws NumericError on a
// non-finite loss.
LossAndGradient loss_and_gradient(const LinearModel& model,
                                  std::span<const Example> batch);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

// Dense Adam with bias correction over a flat parameter block. An empty
// state is sized on first use.
void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, const AdamConfig& cfg);

// Adam state for a LinearModel. A column that has not appeared in any
// gradient yet has zero moments, and the dense update leaves it bitwise
// unchanged, so only columns seen so far are visited. The result equals
// adam_step over the flattened parameters exactly.
class ModelAdam {
 public:
  explicit ModelAdam(const LinearModel& model);

  void step(LinearModel& model, const Gradient& grad, const AdamConfig& cfg);

  const AdamState& state() const { return state_; }
  std::size_t active_columns() const { return active_.size(); }

 private:
  std::size_t num_labels_;
  std::size_t weight_count_;
  AdamState state_;  // flattened [weights..., bias...]
  std::vector<std::uint8_t> is_active_;
  std::vector<std::uint32_t> active_;
};

struct TrainLog {
  std::vector<double> epoch_losses;  // mean per-instance loss, pre-update
};

// One seed's run: zero-initialized weights, per-epoch shuffles drawn from
// `seed`, minibatch Adam. Featurizer max_tokens is taken from
// cfg.max_seq_len.
LinearModel train(const Dataset& dataset, const TrainConfig& cfg,
                  const FeaturizerConfig& featurizer, std::uint64_t seed,
                  TrainLog* log = nullptr);

struct MulticlassPrediction {
  std::string label;
  std::vector<double> probabilities;
};

struct MultilabelPrediction {
  LabelSet labels;
  std::vector<double> scores;
};

// Ties resolve to the lowest label index.
MulticlassPrediction predict_multiclass(const LinearModel& model,
                                        std::string_view text);
// Labels whose sigmoid score is >= the threshold.
MultilabelPrediction predict_multilabel(const LinearModel& model,
                                        std::string_view text);

// Label set for either kind (singleton for multiclass).
LabelSet predict_labels(const LinearModel& model, std::string_view text);

std::vector<double> softmax(std::span<const double> logits);
double sigmoid(double z);

// Per-label threshold sweep on validation data over {0.05, 0.10, ..., 0.95};
// each label keeps the threshold maximizing its F1 (ties go to the value
// closest to the current default).
void tune_label_thresholds(LinearModel& model, const Dataset& validation);

// Versioned binary format; load(save(m)) == m exactly. Zero weight columns
// are omitted from the file.
std::string serialize_model(const LinearModel& model);
LinearModel deserialize_model(std::string_view bytes);
void save_model(const LinearModel& model, const std::filesystem::path& file);
LinearModel load_model(const std::filesystem::path& file);

}  // namespace newscls
