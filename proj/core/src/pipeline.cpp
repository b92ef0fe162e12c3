#include "newscls/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <glog/logging.h>
#include <openssl/evp.h>

#include "newscls/error.hpp"
#include "newscls/rng.hpp"

namespace newscls {

namespace fs = std::filesystem;

std::string_view to_string(Setup setup) {
  switch (setup) {
    case Setup::kMono: return "mono";
    case Setup::kMulti: return "multi";
    case Setup::kAug: return "aug";
  }
  return "?";
}

Setup parse_setup(std::string_view name) {
  for (auto s : kAllSetups) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError(
      fmt::format("unknown setup '{}' (expected mono, multi or aug)", name));
}

std::uint64_t derive_seed(std::uint64_t root, Subtask subtask,
                          std::string_view language, Setup setup,
                          std::size_t index) {
  std::uint64_t s = combine_seed(root, static_cast<std::uint64_t>(subtask));
  s = combine_seed(s, fnv1a64(language));
  s = combine_seed(s, static_cast<std::uint64_t>(setup));
  return combine_seed(s, index);
}

HyperProfile HyperProfile::defaults() {
  TrainConfig document;  // 10 epochs, k=10, length 512, batch 4
  TrainConfig paragraph = document;
  paragraph.epochs = 5;
  paragraph.k_seeds = 5;
  paragraph.max_seq_len = 256;
  paragraph.batch_size = 8;
  HyperProfile p;
  for (auto subtask : {Subtask::kS1, Subtask::kS2, Subtask::kS3}) {
    for (auto setup : kAllSetups) {
      const bool small = subtask == Subtask::kS3 && setup != Setup::kMono;
      p.entries_[{subtask, setup}] = small ? paragraph : document;
    }
  }
  return p;
}

const TrainConfig& HyperProfile::at(Subtask subtask, Setup setup) const {
  return entries_.at({subtask, setup});
}

void HyperProfile::set(Subtask subtask, Setup setup, TrainConfig cfg) {
  validate(cfg);
  entries_[{subtask, setup}] = cfg;
}

void HyperProfile::set_learning_rate(double lr) {
  for (auto& [_, cfg] : entries_) cfg.learning_rate = lr;
}

namespace {

nlohmann::json train_cfg_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"k_seeds", c.k_seeds},
          {"max_seq_len", c.max_seq_len},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

TrainConfig train_cfg_from(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.k_seeds = j.at("k_seeds").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  return c;
}

nlohmann::json featurizer_json(const FeaturizerConfig& f) {
  return {{"hash_dim", f.hash_dim},
          {"ngram_min", f.ngram_min},
          {"ngram_max", f.ngram_max},
          {"lowercase", f.lowercase},
          {"max_tokens", f.max_tokens}};
}

FeaturizerConfig featurizer_from(const nlohmann::json& j) {
  FeaturizerConfig f;
  f.hash_dim = j.at("hash_dim").get<std::uint32_t>();
  f.ngram_min = j.at("ngram_min").get<int>();
  f.ngram_max = j.at("ngram_max").get<int>();
  f.lowercase = j.at("lowercase").get<bool>();
  f.max_tokens = j.at("max_tokens").get<std::size_t>();
  return f;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_dataset(std::string& out, const Dataset& ds) {
  out += format_label_space(ds.label_space());
  for (const auto& l : ds.languages()) out += "lang\t" + l + "\n";
  for (const auto& inst : ds.instances()) {
    out += fmt::format("{}\t{}\t", inst.unit_id.size(), inst.unit_id);
    out += fmt::format("{}\t{}\t", inst.text.size(), inst.text);
    for (const auto& l : inst.labels) out += l + ",";
    out += "\n";
  }
}

Measure measure_for(const LabelSpace& space) {
  if (space.subtask()) return official_measure(*space.subtask());
  return space.multilabel() ? Measure::kF1Micro : Measure::kF1Macro;
}

std::string training_key(const Dataset& train, const TrainConfig& cfg,
                         const FeaturizerConfig& f, std::uint64_t seed) {
  return input_hash(train, nullptr, cfg, f, seed);
}

}  // namespace

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["schema_version"] = RunManifest::kSchemaVersion;
  j["subtask"] = to_string(m.subtask);
  j["language"] = m.language;
  j["setup"] = to_string(m.setup);
  j["seed_index"] = m.seed_index;
  j["seed"] = m.seed;
  j["train_cfg"] = train_cfg_json(m.train_cfg);
  j["featurizer"] = featurizer_json(m.featurizer);
  j["model_path"] = m.model_path;
  j["measure"] = m.measure;
  j["validation_score"] =
      m.validation_score ? nlohmann::json(*m.validation_score) : nlohmann::json();
  j["dev_score"] = m.dev_score ? nlohmann::json(*m.dev_score) : nlohmann::json();
  j["best"] = m.best;
  j["status"] = m.status;
  j["error"] = m.error;
  j["epoch_losses"] = m.epoch_losses;
  j["train_size"] = m.train_size;
  j["validation_size"] = m.validation_size;
  j["created_at"] = m.created_at;
  j["input_hash"] = m.input_hash;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  const auto version = j.at("schema_version").get<int>();
  if (version != RunManifest::kSchemaVersion) {
    throw MigrationError(fmt::format(
        "manifest schema version {} needs migration to version {}", version,
        RunManifest::kSchemaVersion));
  }
  RunManifest m;
  m.subtask = parse_subtask(j.at("subtask").get<std::string>());
  m.language = j.at("language").get<std::string>();
  m.setup = parse_setup(j.at("setup").get<std::string>());
  m.seed_index = j.at("seed_index").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.train_cfg = train_cfg_from(j.at("train_cfg"));
  m.featurizer = featurizer_from(j.at("featurizer"));
  m.model_path = j.at("model_path").get<std::string>();
  m.measure = j.at("measure").get<std::string>();
  if (!j.at("validation_score").is_null()) {
    m.validation_score = j.at("validation_score").get<double>();
  }
  if (!j.at("dev_score").is_null()) m.dev_score = j.at("dev_score").get<double>();
  m.best = j.at("best").get<bool>();
  m.status = j.at("status").get<std::string>();
  m.error = j.at("error").get<std::string>();
  m.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  m.train_size = j.at("train_size").get<std::size_t>();
  m.validation_size = j.at("validation_size").get<std::size_t>();
  m.created_at = j.at("created_at").get<std::string>();
  m.input_hash = j.at("input_hash").get<std::string>();
  return m;
}

void persist_manifest(const RunManifest& m, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const auto tmp = fs::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    out << to_json(m).dump(2) << "\n";
    if (!out) throw IoError(fmt::format("error writing '{}'", tmp.string()));
  }
  fs::rename(tmp, file);
}

RunManifest parse_manifest(std::string_view content, std::string_view source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(fmt::format("{}: corrupt manifest at byte {}: {}", source,
                                  e.byte, e.what()),
                      e.byte);
  }
  try {
    return manifest_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: invalid manifest: {}", source, e.what()));
  }
}

RunManifest load_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), file.string());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string manifest_digest(const RunManifest& m) {
  return sha256_hex(to_json(m).dump());
}

std::string input_hash(const Dataset& train, const Dataset* validation,
                       const TrainConfig& train_cfg,
                       const FeaturizerConfig& featurizer, std::uint64_t seed) {
  std::string canon = "train\n";
  append_dataset(canon, train);
  if (validation) {
    canon += "validation\n";
    append_dataset(canon, *validation);
  }
  canon += train_cfg_json(train_cfg).dump() + "\n";
  canon += featurizer_json(featurizer).dump() + "\n";
  canon += fmt::format("seed {}\n", seed);
  return sha256_hex(canon);
}

std::optional<ModelCache::Entry> ModelCache::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ModelCache::put(const std::string& key, Entry entry) {
  std::lock_guard lock(mutex_);
  entries_.emplace(key, std::move(entry));
}

std::vector<LabelSet> ModelPredictor::predict(
    const std::vector<std::string>& texts) {
  std::vector<LabelSet> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(predict_labels(model_, t));
  return out;
}

std::vector<LabelSet> BackendPredictor::predict(
    const std::vector<std::string>& texts) {
  std::vector<LabelSet> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const auto end = std::min(texts.size(), start + batch_size_);
    const std::vector<std::string> batch(texts.begin() + start,
                                         texts.begin() + end);
    for (const auto& scores : handle_.classify(batch, space_)) {
      LabelSet labels;
      if (space_.multilabel()) {
        for (std::size_t l = 0; l < scores.size(); ++l) {
          if (scores[l] >= threshold_) labels.insert(space_.label(l));
        }
      } else {
        const auto best = static_cast<std::size_t>(
            std::max_element(scores.begin(), scores.end()) - scores.begin());
        labels.insert(space_.label(best));
      }
      out.push_back(std::move(labels));
    }
  }
  return out;
}

LabelMap predict_dataset(Predictor& predictor, const Dataset& dataset) {
  std::vector<std::string> texts;
  texts.reserve(dataset.size());
  for (const auto& inst : dataset.instances()) texts.push_back(inst.text);
  const auto labels = predictor.predict(texts);
  LabelMap out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out[dataset.instances()[i].unit_id] = labels[i];
  }
  return out;
}

double official_score(Predictor& predictor, const Dataset& dataset) {
  LabelMap gold;
  for (const auto& inst : dataset.instances()) gold[inst.unit_id] = inst.labels;
  const auto report =
      score(gold, predict_dataset(predictor, dataset), dataset.label_space());
  return report.value(measure_for(dataset.label_space()));
}

LabelMap produce_predictions(Predictor& predictor, const std::vector<Unit>& units,
                             const LabelSpace& space, const fs::path& out_file) {
  std::set<std::string_view> seen;
  for (const auto& u : units) {
    if (!seen.insert(u.unit_id).second) {
      throw ValidationError(fmt::format("duplicate test unit '{}'", u.unit_id));
    }
  }
  std::vector<std::string> texts;
  texts.reserve(units.size());
  for (const auto& u : units) texts.push_back(u.text);
  std::vector<LabelSet> labels;
  try {
    labels = predictor.predict(texts);
  } catch (const Error& e) {
    throw RunError(fmt::format(
        "inference failed, predictions file '{}' not written: {}",
        out_file.string(), e.what()));
  }
  if (labels.size() != units.size()) {
    throw RunError(fmt::format(
        "predictor returned {} results for {} units; '{}' not written",
        labels.size(), units.size(), out_file.string()));
  }
  std::string body;
  LabelMap out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    body += format_label_row(units[i].unit_id, labels[i], space);
    out[units[i].unit_id] = labels[i];
  }
  if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
  const auto tmp = fs::path(out_file.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    f << body;
    if (!f) throw IoError(fmt::format("error writing '{}'", tmp.string()));
  }
  fs::rename(tmp, out_file);
  return out;
}

SweepOutcome run_seed_sweep(const SweepRequest& req) {
  if (!req.train || !req.validation) {
    throw ValidationError("sweep needs training and validation data");
  }
  if (req.train->empty()) throw ValidationError("empty training set");
  if (req.validation->empty()) throw ValidationError("empty validation set");
  validate(req.train_cfg);
  const auto k = static_cast<std::size_t>(req.train_cfg.k_seeds);
  const auto measure = official_measure(req.subtask);
  const std::string seed_language =
      req.seed_language.empty() ? req.language : req.seed_language;

  FeaturizerConfig featurizer = req.featurizer;
  featurizer.max_tokens = req.train_cfg.max_seq_len;

  SweepOutcome out;
  out.manifests.resize(k);
  out.manifest_paths.resize(k);
  out.models.resize(k);

  auto run_one = [&](std::size_t i) {
    auto& m = out.manifests[i];
    m.subtask = req.subtask;
    m.language = req.language;
    m.setup = req.setup;
    m.seed_index = i;
    m.seed = derive_seed(req.root_seed, req.subtask, seed_language, req.setup, i);
    m.train_cfg = req.train_cfg;
    m.featurizer = featurizer;
    m.measure = std::string(to_string(measure));
    m.train_size = req.train->size();
    m.validation_size = req.validation->size();
    m.input_hash = input_hash(*req.train, req.validation, req.train_cfg,
                              featurizer, m.seed);
    try {
      std::shared_ptr<const LinearModel> model;
      const auto key = training_key(*req.train, req.train_cfg, featurizer, m.seed);
      if (auto hit = req.cache ? req.cache->find(key) : std::nullopt) {
        model = hit->model;
        m.epoch_losses = hit->epoch_losses;
      } else {
        TrainLog log;
        auto trained = train(*req.train, req.train_cfg, featurizer, m.seed, &log);
        model = std::make_shared<const LinearModel>(std::move(trained));
        m.epoch_losses = log.epoch_losses;
        if (req.cache) req.cache->put(key, {model, log.epoch_losses});
      }
      if (req.tune_thresholds && model->kind() == LabelKind::kMultilabel) {
        auto tuned = *model;
        tune_label_thresholds(tuned, *req.validation);
        model = std::make_shared<const LinearModel>(std::move(tuned));
      }
      ModelPredictor predictor(*model);
      m.validation_score = official_score(predictor, *req.validation);
      out.models[i] = model;
    } catch (const Error& e) {
      m.status = "failed";
      m.error = e.what();
      LOG(WARNING) << "seed " << i << " of " << to_string(req.subtask) << "/"
                   << req.language << "/" << to_string(req.setup)
                   << " failed: " << e.what();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(req.jobs, k));
  if (threads == 1) {
    for (std::size_t i = 0; i < k; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < k; i = next.fetch_add(1)) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Sequential reduction: argmax, lowest index on ties.
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& m = out.manifests[i];
    if (!m.ok()) continue;
    if (!best || *m.validation_score > *out.manifests[*best].validation_score) {
      best = i;
    }
  }
  if (!best) {
    throw RunError(fmt::format("all {} seeds failed for {}/{}/{}: {}", k,
                               to_string(req.subtask), req.language,
                               to_string(req.setup),
                               out.manifests.front().error));
  }
  out.best_index = *best;
  out.manifests[*best].best = true;

  if (!req.runs_dir.empty()) {
    const auto base = req.runs_dir / std::string(to_string(req.subtask)) /
                      req.language / std::string(to_string(req.setup));
    for (std::size_t i = 0; i < k; ++i) {
      auto& m = out.manifests[i];
      const auto dir = base / fmt::format("seed{}", i);
      fs::create_directories(dir);
      if (out.models[i]) {
        m.model_path = "model.bin";
        save_model(*out.models[i], dir / m.model_path);
      }
      const auto file = dir / "manifest.json";
      // A rerun with identical inputs keeps the original timestamp and dev
      // score so the manifest bytes do not change.
      m.created_at = utc_now();
      if (fs::exists(file)) {
        try {
          const auto previous = load_manifest(file);
          if (previous.input_hash == m.input_hash) {
            m.created_at = previous.created_at;
            if (m.best) m.dev_score = previous.dev_score;
          }
        } catch (const Error&) {
        }
      }
      persist_manifest(m, file);
      out.manifest_paths[i] = file;
    }
  }
  return out;
}

Setup select_setup(Subtask subtask, std::string_view language,
                   const std::map<Setup, double>& dev_scores) {
  if (dev_scores.empty()) {
    throw ValidationError(fmt::format("no dev scores for {}/{}",
                                      to_string(subtask), language));
  }
  constexpr std::array<Setup, 3> preference = {Setup::kMulti, Setup::kMono,
                                               Setup::kAug};
  std::optional<Setup> best;
  for (auto s : preference) {
    const auto it = dev_scores.find(s);
    if (it == dev_scores.end()) continue;
    if (!best || it->second > dev_scores.at(*best)) best = s;
  }
  return *best;
}

SetupConstraint route_language(std::string_view language,
                               const std::set<std::string>& known_languages) {
  if (known_languages.count(std::string(language))) return {};
  return {Setup::kMulti, true};
}

}  // namespace newscls
