#include "newscls/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "newscls/error.hpp"
#include "newscls/rng.hpp"

namespace newscls {

namespace {

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// log(1 + e^z) without overflow.
double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline void adam_update(double& p, double g, double& m, double& v, double lr,
                        double b1, double b2, double eps, double bc1,
                        double bc2) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g * g;
  const double m_hat = m / bc1;
  const double v_hat = v / bc2;
  p -= lr * m_hat / (std::sqrt(v_hat) + eps);
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.epochs <= 0) throw ValidationError("epochs must be positive");
  if (cfg.k_seeds <= 0) throw ValidationError("k_seeds must be positive");
  if (cfg.max_seq_len == 0) throw ValidationError("max_seq_len must be positive");
  if (cfg.batch_size == 0) throw ValidationError("batch_size must be positive");
  if (!(cfg.learning_rate > 0.0)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (!(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0) ||
      !(cfg.adam_beta2 > 0.0 && cfg.adam_beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in (0, 1)");
  }
  if (!(cfg.adam_epsilon > 0.0)) {
    throw ValidationError("Adam epsilon must be positive");
  }
}

LinearModel::LinearModel(LabelSpace space, FeaturizerConfig featurizer,
                         double threshold)
    : space_(std::move(space)), featurizer_(featurizer) {
  validate(featurizer_);
  set_threshold(threshold);
  weights_.assign(std::size_t(featurizer_.hash_dim) * space_.size(), 0.0);
  bias_.assign(space_.size(), 0.0);
}

void LinearModel::set_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) {
    throw ValidationError(fmt::format("threshold must lie in (0, 1), got {}", t));
  }
  threshold_ = t;
}

void LinearModel::set_label_thresholds(std::vector<double> thresholds) {
  if (!thresholds.empty() && thresholds.size() != num_labels()) {
    throw ValidationError("one threshold per label required");
  }
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) {
      throw ValidationError(fmt::format("threshold must lie in (0, 1), got {}", t));
    }
  }
  label_thresholds_ = std::move(thresholds);
}

std::vector<double> LinearModel::logits(const SparseVector& x) const {
  const auto L = num_labels();
  std::vector<double> z(bias_.begin(), bias_.end());
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    const double* col = &weights_[std::size_t(x.index[k]) * L];
    const double xv = x.value[k];
    for (std::size_t l = 0; l < L; ++l) z[l] += col[l] * xv;
  }
  return z;
}

bool LinearModel::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(weights_.begin(), weights_.end(), finite) &&
         std::all_of(bias_.begin(), bias_.end(), finite);
}

Example make_example(const LabeledInstance& instance, const LabelSpace& space,
                     const FeaturizerConfig& cfg) {
  Example ex;
  ex.features = featurize_text(instance.text, cfg);
  for (const auto& l : instance.labels) {
    const auto idx = space.index_of(l);
    if (!idx) {
      throw ValidationError(fmt::format("unit '{}': unknown label '{}'",
                                        instance.unit_id, l));
    }
    ex.labels.push_back(*idx);
  }
  std::sort(ex.labels.begin(), ex.labels.end());
  return ex;
}

std::vector<double> Gradient::to_dense(std::uint32_t hash_dim) const {
  std::vector<double> dense(std::size_t(hash_dim) * num_labels + num_labels,
                            0.0);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::copy_n(values.begin() + c * num_labels, num_labels,
                dense.begin() + std::size_t(columns[c]) * num_labels);
  }
  std::copy(bias.begin(), bias.end(),
            dense.begin() + std::size_t(hash_dim) * num_labels);
  return dense;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossAndGradient loss_and_gradient(const LinearModel& model,
                                  std::span<const Example> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  const auto L = model.num_labels();
  const bool multilabel = model.kind() == LabelKind::kMultilabel;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  LossAndGradient out;
  auto& g = out.gradient;
  g.num_labels = L;
  for (const auto& ex : batch) {
    g.columns.insert(g.columns.end(), ex.features.index.begin(),
                     ex.features.index.end());
  }
  std::sort(g.columns.begin(), g.columns.end());
  g.columns.erase(std::unique(g.columns.begin(), g.columns.end()),
                  g.columns.end());
  g.values.assign(g.columns.size() * L, 0.0);
  g.bias.assign(L, 0.0);

  std::vector<double> dz(L);
  double total = 0.0;
  for (const auto& ex : batch) {
    const auto z = model.logits(ex.features);
    if (multilabel) {
      std::size_t next = 0;
      for (std::size_t l = 0; l < L; ++l) {
        const bool positive = next < ex.labels.size() && ex.labels[next] == l;
        if (positive) ++next;
        const double y = positive ? 1.0 : 0.0;
        total += softplus(z[l]) - y * z[l];
        dz[l] = (sigmoid(z[l]) - y) * inv_b;
      }
    } else {
      if (ex.labels.size() != 1) {
        throw ValidationError("multiclass example needs exactly one label");
      }
      const double lse = log_sum_exp(z);
      const auto y = ex.labels.front();
      total += lse - z[y];
      for (std::size_t l = 0; l < L; ++l) {
        dz[l] = (std::exp(z[l] - lse) - (l == y ? 1.0 : 0.0)) * inv_b;
      }
    }
    for (std::size_t l = 0; l < L; ++l) g.bias[l] += dz[l];
    for (std::size_t k = 0; k < ex.features.nnz(); ++k) {
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(g.columns.begin(), g.columns.end(),
                           ex.features.index[k]) -
          g.columns.begin());
      const double xv = ex.features.value[k];
      double* col = &g.values[pos * L];
      for (std::size_t l = 0; l < L; ++l) col[l] += xv * dz[l];
    }
  }
  out.loss = total * inv_b;
  if (!std::isfinite(out.loss)) {
    throw NumericError(fmt::format(
        "non-finite loss {} (learning rate too high or corrupted input)",
        out.loss));
  }
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, const AdamConfig& cfg) {
  if (grad.size() != params.size()) {
    throw ValidationError(fmt::format("gradient has {} entries, parameters {}",
                                      grad.size(), params.size()));
  }
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ValidationError("Adam state shape does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(params[i], grad[i], state.first_moment[i],
                state.second_moment[i], cfg.learning_rate, cfg.beta1,
                cfg.beta2, cfg.epsilon, bc1, bc2);
  }
}

ModelAdam::ModelAdam(const LinearModel& model)
    : num_labels_(model.num_labels()),
      weight_count_(model.weights().size()),
      is_active_(model.hash_dim(), 0) {
  state_.first_moment.assign(weight_count_ + num_labels_, 0.0);
  state_.second_moment.assign(weight_count_ + num_labels_, 0.0);
}

void ModelAdam::step(LinearModel& model, const Gradient& grad,
                     const AdamConfig& cfg) {
  const auto L = num_labels_;
  if (grad.num_labels != L || model.num_labels() != L ||
      model.weights().size() != weight_count_) {
    throw ValidationError("gradient shape does not match the model");
  }
  for (auto c : grad.columns) {
    if (!is_active_[c]) {
      is_active_[c] = 1;
      active_.push_back(c);
    }
  }
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  auto& m = state_.first_moment;
  auto& v = state_.second_moment;
  auto weights = model.weights();

  std::size_t next = 0;  // cursor into grad.columns, which is sorted
  std::sort(active_.begin(), active_.end());
  for (auto c : active_) {
    const double* g = nullptr;
    while (next < grad.columns.size() && grad.columns[next] < c) ++next;
    if (next < grad.columns.size() && grad.columns[next] == c) {
      g = &grad.values[next * L];
    }
    const std::size_t base = std::size_t(c) * L;
    for (std::size_t l = 0; l < L; ++l) {
      adam_update(weights[base + l], g ? g[l] : 0.0, m[base + l], v[base + l],
                  cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, bc1,
                  bc2);
    }
  }
  auto bias = model.bias();
  for (std::size_t l = 0; l < L; ++l) {
    adam_update(bias[l], grad.bias[l], m[weight_count_ + l],
                v[weight_count_ + l], cfg.learning_rate, cfg.beta1, cfg.beta2,
                cfg.epsilon, bc1, bc2);
  }
}

LinearModel train(const Dataset& dataset, const TrainConfig& cfg,
                  const FeaturizerConfig& featurizer, std::uint64_t seed,
                  TrainLog* log) {
  validate(cfg);
  if (dataset.empty()) throw ValidationError("cannot train on an empty dataset");
  FeaturizerConfig fcfg = featurizer;
  fcfg.max_tokens = cfg.max_seq_len;
  LinearModel model(dataset.label_space(), fcfg);

  std::vector<Example> examples;
  examples.reserve(dataset.size());
  for (const auto& inst : dataset.instances()) {
    examples.push_back(make_example(inst, dataset.label_space(), fcfg));
  }

  ModelAdam optimizer(model);
  const auto adam = cfg.adam();
  Rng rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      const auto lg = loss_and_gradient(model, batch);
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      optimizer.step(model, lg.gradient, adam);
    }
    if (log) {
      log->epoch_losses.push_back(epoch_loss /
                                  static_cast<double>(examples.size()));
    }
  }
  if (!model.all_finite()) {
    throw NumericError("training produced non-finite parameters");
  }
  return model;
}

MulticlassPrediction predict_multiclass(const LinearModel& model,
                                        std::string_view text) {
  if (model.kind() != LabelKind::kMulticlass) {
    throw ValidationError("predict_multiclass needs a multiclass model");
  }
  const auto z = model.logits(featurize_text(text, model.featurizer()));
  MulticlassPrediction out;
  out.probabilities = softmax(z);
  // max_element returns the first maximum: lowest index wins ties.
  const auto best = static_cast<std::size_t>(
      std::max_element(out.probabilities.begin(), out.probabilities.end()) -
      out.probabilities.begin());
  out.label = model.label_space().label(best);
  return out;
}

MultilabelPrediction predict_multilabel(const LinearModel& model,
                                        std::string_view text) {
  if (model.kind() != LabelKind::kMultilabel) {
    throw ValidationError("predict_multilabel needs a multilabel model");
  }
  const auto z = model.logits(featurize_text(text, model.featurizer()));
  MultilabelPrediction out;
  out.scores.resize(z.size());
  for (std::size_t l = 0; l < z.size(); ++l) {
    out.scores[l] = sigmoid(z[l]);
    if (out.scores[l] >= model.threshold_for(l)) {
      out.labels.insert(model.label_space().label(l));
    }
  }
  return out;
}

LabelSet predict_labels(const LinearModel& model, std::string_view text) {
  if (model.kind() == LabelKind::kMulticlass) {
    return {predict_multiclass(model, text).label};
  }
  return predict_multilabel(model, text).labels;
}

void tune_label_thresholds(LinearModel& model, const Dataset& validation) {
  if (model.kind() != LabelKind::kMultilabel || validation.empty()) return;
  const auto L = model.num_labels();
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<bool>> gold;
  for (const auto& inst : validation.instances()) {
    const auto z = model.logits(featurize_text(inst.text, model.featurizer()));
    std::vector<double> s(L);
    std::vector<bool> y(L, false);
    for (std::size_t l = 0; l < L; ++l) {
      s[l] = sigmoid(z[l]);
      y[l] = inst.labels.count(model.label_space().label(l)) > 0;
    }
    scores.push_back(std::move(s));
    gold.push_back(std::move(y));
  }
  std::vector<double> chosen(L, model.threshold());
  for (std::size_t l = 0; l < L; ++l) {
    double best_f1 = -1.0;
    for (int step = 1; step <= 19; ++step) {
      const double t = 0.05 * step;
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool p = scores[i][l] >= t;
        tp += p && gold[i][l];
        fp += p && !gold[i][l];
        fn += !p && gold[i][l];
      }
      const double denom = 2.0 * tp + fp + fn;
      const double f1 = denom > 0 ? 2.0 * tp / denom : 0.0;
      const bool closer = std::abs(t - model.threshold()) <
                          std::abs(chosen[l] - model.threshold());
      if (f1 > best_f1 || (f1 == best_f1 && closer)) {
        best_f1 = f1;
        chosen[l] = t;
      }
    }
  }
  model.set_label_thresholds(std::move(chosen));
}

}  // namespace newscls
