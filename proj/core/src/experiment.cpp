#include "newscls/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <glog/logging.h>

#include "newscls/error.hpp"
#include "newscls/rng.hpp"

namespace newscls {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, std::string_view content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const auto tmp = fs::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    out << content;
    if (!out) throw IoError(fmt::format("error writing '{}'", tmp.string()));
  }
  fs::rename(tmp, file);
}

int subtask_number(Subtask s) { return static_cast<int>(s) + 1; }

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

const std::set<std::string> kTopLevelKeys = {
    "languages",     "surprise_languages", "subtasks",        "setups",
    "root_seed",     "paths",              "split",           "featurizer",
    "learning_rate", "tune_thresholds",    "hyper_overrides", "augment",
    "backend",       "run_name_prefix"};

void check_language_code(const std::string& code) {
  if (code.empty() || code == "*" ||
      code.find_first_of("/\\:#~\t\n ") != std::string::npos) {
    throw ValidationError(fmt::format("invalid language code '{}'", code));
  }
}

ExperimentConfig config_from_json(const json& j, const fs::path& base) {
  for (const auto& [key, _] : j.items()) {
    if (!kTopLevelKeys.count(key)) {
      throw ValidationError(fmt::format("unknown config key '{}'", key));
    }
  }
  ExperimentConfig c;
  c.languages = j.at("languages").get<std::vector<std::string>>();
  c.surprise_languages =
      j.value("surprise_languages", std::vector<std::string>{});
  std::set<std::string> seen;
  for (const auto& l : c.all_languages()) {
    check_language_code(l);
    if (!seen.insert(l).second) {
      throw ValidationError(fmt::format("language '{}' listed twice", l));
    }
  }
  if (j.contains("subtasks")) {
    c.subtasks.clear();
    for (const auto& s : j.at("subtasks")) {
      c.subtasks.push_back(parse_subtask(s.get<std::string>()));
    }
  }
  if (j.contains("setups")) {
    c.setups.clear();
    for (const auto& s : j.at("setups")) {
      c.setups.push_back(parse_setup(s.get<std::string>()));
    }
  }
  if (c.subtasks.empty()) throw ValidationError("no subtasks configured");
  if (c.setups.empty()) throw ValidationError("no setups configured");
  c.root_seed = j.value("root_seed", kDefaultRootSeed);

  const auto& paths = j.at("paths");
  c.data_root = resolve(base, paths.at("data_root").get<std::string>());
  c.work_dir = resolve(base, paths.at("work_dir").get<std::string>());
  for (const auto& [key, value] : paths.at("label_spaces").items()) {
    c.label_spaces[parse_subtask(key)] = resolve(base, value.get<std::string>());
  }
  for (auto s : c.subtasks) {
    if (!c.label_spaces.count(s)) {
      throw ValidationError(
          fmt::format("paths.label_spaces has no entry for {}", to_string(s)));
    }
  }
  if (paths.contains("lexicons")) {
    for (const auto& [lang, value] : paths.at("lexicons").items()) {
      c.lexicons[lang] = resolve(base, value.get<std::string>());
    }
  }
  if (paths.contains("backend_registry")) {
    c.backend_registry =
        resolve(base, paths.at("backend_registry").get<std::string>());
  }

  if (j.contains("split")) {
    c.train_fraction = j.at("split").value("train_fraction", 0.8);
  }
  if (j.contains("featurizer")) {
    const auto& f = j.at("featurizer");
    c.featurizer.hash_dim = f.value("hash_dim", c.featurizer.hash_dim);
    c.featurizer.ngram_min = f.value("ngram_min", c.featurizer.ngram_min);
    c.featurizer.ngram_max = f.value("ngram_max", c.featurizer.ngram_max);
    c.featurizer.lowercase = f.value("lowercase", c.featurizer.lowercase);
  }
  validate(c.featurizer);
  if (j.contains("learning_rate")) {
    c.profile.set_learning_rate(j.at("learning_rate").get<double>());
  }
  c.tune_thresholds = j.value("tune_thresholds", false);
  for (const auto& o : j.value("hyper_overrides", json::array())) {
    const auto subtask = parse_subtask(o.at("subtask").get<std::string>());
    const auto setup = parse_setup(o.at("setup").get<std::string>());
    auto cfg = c.profile.at(subtask, setup);
    cfg.epochs = o.value("epochs", cfg.epochs);
    cfg.k_seeds = o.value("k_seeds", cfg.k_seeds);
    cfg.max_seq_len = o.value("max_seq_len", cfg.max_seq_len);
    cfg.batch_size = o.value("batch_size", cfg.batch_size);
    cfg.learning_rate = o.value("learning_rate", cfg.learning_rate);
    c.profile.set(subtask, setup, cfg);
  }

  c.augment.ops = {AugmentOp::kRandomInsert, AugmentOp::kRandomSwap,
                   AugmentOp::kRandomDelete};
  c.augment.seed = c.root_seed;
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    if (a.contains("ops")) {
      c.augment.ops.clear();
      for (const auto& op : a.at("ops")) {
        c.augment.ops.push_back(parse_augment_op(op.get<std::string>()));
      }
    }
    c.augment.rate = a.value("rate", c.augment.rate);
    c.augment.copies = a.value("copies", c.augment.copies);
    c.augment.seed = a.value("seed", c.augment.seed);
  }
  validate(c.augment);

  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    c.backend_command = b.value("command", std::vector<std::string>{});
    c.backend_timeout = std::chrono::milliseconds(b.value("timeout_ms", 30000));
  }
  c.run_name_prefix = j.value("run_name_prefix", c.run_name_prefix);
  return c;
}

json sweep_index(const SweepOutcome& out, const fs::path& dir) {
  json paths = json::array();
  for (const auto& p : out.manifest_paths) {
    paths.push_back(fs::relative(p, dir).generic_string());
  }
  return {{"best_index", out.best_index}, {"manifests", paths}};
}

// Restricts predictions to the gold ids (test label files may omit units).
LabelMap restrict_to(const LabelMap& pred, const LabelMap& gold) {
  LabelMap out;
  for (const auto& [id, _] : gold) {
    const auto it = pred.find(id);
    if (it != pred.end()) out.emplace(id, it->second);
  }
  return out;
}

}  // namespace

bool ExperimentConfig::is_known(std::string_view language) const {
  return std::find(languages.begin(), languages.end(), language) !=
         languages.end();
}

std::vector<std::string> ExperimentConfig::all_languages() const {
  auto out = languages;
  out.insert(out.end(), surprise_languages.begin(), surprise_languages.end());
  return out;
}

ExperimentConfig parse_experiment_config(std::string_view content,
                                         const fs::path& base_dir,
                                         std::string_view source) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    throw FormatError(
        fmt::format("{}: invalid JSON at byte {}: {}", source, e.byte, e.what()),
        e.byte);
  }
  try {
    return config_from_json(j, base_dir);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", source, e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", source, e.what()));
  }
}

ExperimentConfig load_experiment_config(const fs::path& file) {
  if (!fs::is_regular_file(file)) {
    throw IoError(fmt::format("config file '{}' not found", file.string()));
  }
  return parse_experiment_config(read_text(file), file.parent_path(),
                                 file.string());
}

std::string_view to_string(Subset subset) {
  switch (subset) {
    case Subset::kTrain: return "train";
    case Subset::kDev: return "dev";
    case Subset::kTest: return "test";
  }
  return "?";
}

json to_json(const Selection& s) {
  json scores = json::object();
  for (const auto& [setup, score] : s.dev_scores) {
    scores[std::string(to_string(setup))] = score;
  }
  return {{"subtask", to_string(s.subtask)},
          {"language", s.language},
          {"setup", to_string(s.setup)},
          {"forced", s.forced},
          {"dev_scores", scores},
          {"manifest", s.manifest},
          {"run_name", s.run_name}};
}

Selection selection_from_json(const json& j) {
  Selection s;
  s.subtask = parse_subtask(j.at("subtask").get<std::string>());
  s.language = j.at("language").get<std::string>();
  s.setup = parse_setup(j.at("setup").get<std::string>());
  s.forced = j.at("forced").get<bool>();
  for (const auto& [key, value] : j.at("dev_scores").items()) {
    s.dev_scores[parse_setup(key)] = value.get<double>();
  }
  s.manifest = j.at("manifest").get<std::string>();
  s.run_name = j.at("run_name").get<std::string>();
  return s;
}

Experiment::Experiment(ExperimentConfig config, unsigned jobs)
    : config_(std::move(config)), jobs_(std::max(1u, jobs)) {}

const LabelSpace& Experiment::label_space(Subtask subtask) {
  auto it = spaces_.find(subtask);
  if (it != spaces_.end()) return it->second;
  const auto path = config_.label_spaces.find(subtask);
  if (path == config_.label_spaces.end()) {
    throw ValidationError(
        fmt::format("no label space configured for {}", to_string(subtask)));
  }
  auto space = load_label_space(path->second);
  if (space.subtask() != subtask) {
    throw ValidationError(fmt::format("label space '{}' is not bound to {}",
                                      path->second.string(), to_string(subtask)));
  }
  return spaces_.emplace(subtask, std::move(space)).first->second;
}

fs::path Experiment::articles_dir(Subtask subtask, std::string_view language,
                                  Subset subset) const {
  return config_.data_root / std::string(language) /
         fmt::format("{}-articles-subtask-{}", to_string(subset),
                     subtask_number(subtask));
}

fs::path Experiment::labels_file(Subtask subtask, std::string_view language,
                                 Subset subset) const {
  return config_.data_root / std::string(language) /
         fmt::format("{}-labels-subtask-{}.txt", to_string(subset),
                     subtask_number(subtask));
}

fs::path Experiment::split_dir(Subtask subtask, std::string_view language) const {
  return config_.work_dir / "splits" / std::string(to_string(subtask)) /
         std::string(language);
}

fs::path Experiment::augmented_dir(Subtask subtask,
                                   std::string_view language) const {
  return config_.work_dir / "augmented" / std::string(to_string(subtask)) /
         std::string(language);
}

fs::path Experiment::runs_dir() const { return config_.work_dir / "runs"; }

fs::path Experiment::sweep_dir(Subtask subtask, std::string_view language,
                               Setup setup) const {
  return runs_dir() / std::string(to_string(subtask)) / std::string(language) /
         std::string(to_string(setup));
}

fs::path Experiment::selection_file(Subtask subtask,
                                    std::string_view language) const {
  return config_.work_dir / "selections" / std::string(to_string(subtask)) /
         fmt::format("{}.json", language);
}

fs::path Experiment::predictions_file(Subtask subtask,
                                      std::string_view language) const {
  return config_.work_dir / "predictions" / std::string(to_string(subtask)) /
         fmt::format("{}.tsv", language);
}

fs::path Experiment::results_dir() const { return config_.work_dir / "results"; }

bool Experiment::has_labels(Subtask subtask, std::string_view language,
                            Subset subset) const {
  return fs::is_regular_file(labels_file(subtask, language, subset)) &&
         fs::is_directory(articles_dir(subtask, language, subset));
}

Dataset Experiment::load_subset(Subtask subtask, std::string_view language,
                                Subset subset) {
  const auto dir = articles_dir(subtask, language, subset);
  const auto labels = labels_file(subtask, language, subset);
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("articles directory '{}' not found", dir.string()));
  }
  if (!fs::is_regular_file(labels)) {
    throw IoError(fmt::format("labels file '{}' not found", labels.string()));
  }
  const auto& space = label_space(subtask);
  auto bound = newscls::bind(parse_documents(dir, language), parse_labels(labels, space),
                    space);
  return std::move(bound.dataset);
}

std::vector<Unit> Experiment::load_test_units(Subtask subtask,
                                              std::string_view language) {
  const auto dir = articles_dir(subtask, language, Subset::kTest);
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("articles directory '{}' not found", dir.string()));
  }
  return units_of(parse_documents(dir, language), subtask);
}

std::uint64_t Experiment::split_seed(Subtask subtask,
                                     std::string_view language) const {
  auto s = combine_seed(config_.root_seed, fnv1a64("split"));
  s = combine_seed(s, static_cast<std::uint64_t>(subtask));
  return combine_seed(s, fnv1a64(language));
}

std::uint64_t Experiment::augment_seed(Subtask subtask,
                                       std::string_view language) const {
  auto s = combine_seed(config_.augment.seed, fnv1a64("augment"));
  s = combine_seed(s, static_cast<std::uint64_t>(subtask));
  return combine_seed(s, fnv1a64(language));
}

std::pair<Dataset, Dataset> Experiment::split_language(Subtask subtask,
                                                       std::string_view language) {
  if (!config_.is_known(language)) {
    throw ValidationError(fmt::format(
        "'{}' is not a training language and has no train subset", language));
  }
  const auto raw = load_subset(subtask, language, Subset::kTrain);
  const SplitConfig cfg{config_.train_fraction, split_seed(subtask, language)};
  auto parts = split(raw, cfg);
  const auto dir = split_dir(subtask, language);
  write_dataset(parts.first, dir / "train");
  write_dataset(parts.second, dir / "validation");
  json ids_train = json::array(), ids_val = json::array();
  for (const auto& inst : parts.first.instances()) ids_train.push_back(inst.unit_id);
  for (const auto& inst : parts.second.instances()) ids_val.push_back(inst.unit_id);
  const json meta = {{"subtask", to_string(subtask)},
                     {"language", language},
                     {"seed", cfg.seed},
                     {"train_fraction", cfg.train_fraction},
                     {"train_size", parts.first.size()},
                     {"validation_size", parts.second.size()},
                     {"train_ids", ids_train},
                     {"validation_ids", ids_val}};
  write_text(dir / "split.json", meta.dump(2) + "\n");
  return parts;
}

std::pair<Dataset, Dataset> Experiment::load_split(Subtask subtask,
                                                   std::string_view language) {
  const auto dir = split_dir(subtask, language);
  if (!fs::is_regular_file(dir / "split.json")) {
    throw IoError(fmt::format("no split for {}/{} in '{}'; run split first",
                              to_string(subtask), language, dir.string()));
  }
  return {read_dataset(dir / "train"), read_dataset(dir / "validation")};
}

std::unique_ptr<BackendHandle> Experiment::connect_for(std::string_view language) {
  if (config_.backend_command.empty()) {
    throw ValidationError("backend.command is not configured");
  }
  const auto registry = config_.backend_registry.empty()
                            ? default_registry()
                            : load_registry(config_.backend_registry);
  auto it = registry.find(std::string(language));
  if (it == registry.end()) it = registry.find("multi");
  if (it == registry.end()) {
    throw ValidationError(
        fmt::format("backend registry has no model for '{}' and no 'multi' entry",
                    language));
  }
  return connect_backend({config_.backend_command, it->second,
                          config_.backend_timeout});
}

Dataset Experiment::augment_language(Subtask subtask, std::string_view language) {
  const auto train = load_split(subtask, language).first;
  auto plan = config_.augment;
  plan.seed = augment_seed(subtask, language);
  SynonymLexicon lexicon;
  if (plan.needs_lexicon()) {
    const auto it = config_.lexicons.find(std::string(language));
    if (it != config_.lexicons.end()) {
      lexicon = load_lexicon(it->second);
    } else {
      LOG(WARNING) << "no synonym lexicon configured for '" << language
                   << "'; synonym replacement leaves text unchanged";
    }
  }
  std::unique_ptr<BackendHandle> backend;
  if (plan.needs_backend()) backend = connect_for(language);
  auto augmented = augment_dataset(train, plan, &lexicon, backend.get(), jobs_);
  write_dataset(augmented, augmented_dir(subtask, language) / "train");
  return augmented;
}

Dataset Experiment::load_augmented(Subtask subtask, std::string_view language) {
  const auto dir = augmented_dir(subtask, language) / "train";
  if (!fs::is_regular_file(dir / "labelspace.tsv")) {
    throw IoError(fmt::format("no augmented data for {}/{} in '{}'; run augment first",
                              to_string(subtask), language, dir.string()));
  }
  return read_dataset(dir);
}

std::pair<Dataset, Dataset> Experiment::sweep_data(Subtask subtask,
                                                   std::string_view language,
                                                   Setup setup) {
  const bool known = config_.is_known(language);
  if (!known && setup != Setup::kMulti) {
    throw ValidationError(fmt::format(
        "'{}' has no training data; only the multi setup applies", language));
  }
  switch (setup) {
    case Setup::kMono:
      return load_split(subtask, language);
    case Setup::kAug:
      return {load_augmented(subtask, language),
              load_split(subtask, language).second};
    case Setup::kMulti: {
      std::vector<Dataset> trains, validations;
      for (const auto& l : config_.languages) {
        auto parts = load_split(subtask, l);
        trains.push_back(std::move(parts.first));
        validations.push_back(std::move(parts.second));
      }
      auto merged = merge_multilingual(trains);
      if (known) {
        return {std::move(merged), load_split(subtask, language).second};
      }
      return {std::move(merged), merge_multilingual(validations)};
    }
  }
  throw ValidationError("unknown setup");
}

SweepOutcome Experiment::sweep(Subtask subtask, std::string_view language,
                               Setup setup) {
  const auto data = sweep_data(subtask, language, setup);
  SweepRequest req;
  req.subtask = subtask;
  req.language = std::string(language);
  req.setup = setup;
  req.train = &data.first;
  req.validation = &data.second;
  req.train_cfg = config_.profile.at(subtask, setup);
  req.featurizer = config_.featurizer;
  req.root_seed = config_.root_seed;
  req.seed_language = setup == Setup::kMulti ? "*" : std::string(language);
  req.runs_dir = runs_dir();
  req.jobs = jobs_;
  req.tune_thresholds = config_.tune_thresholds;
  req.cache = &cache_;
  auto out = run_seed_sweep(req);
  const auto dir = sweep_dir(subtask, language, setup);
  write_text(dir / "sweep.json", sweep_index(out, dir).dump(2) + "\n");
  return out;
}

fs::path Experiment::best_manifest(Subtask subtask, std::string_view language,
                                   Setup setup) const {
  const auto dir = sweep_dir(subtask, language, setup);
  const auto index_file = dir / "sweep.json";
  if (!fs::is_regular_file(index_file)) {
    throw IoError(fmt::format("no sweep for {}/{}/{} in '{}'; run sweep first",
                              to_string(subtask), language, to_string(setup),
                              dir.string()));
  }
  try {
    const auto j = json::parse(read_text(index_file));
    const auto best = j.at("best_index").get<std::size_t>();
    return dir / j.at("manifests").at(best).get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", index_file.string(), e.what()));
  }
}

Selection Experiment::select(Subtask subtask, std::string_view language) {
  const auto constraint = route_language(language, {config_.languages.begin(),
                                                    config_.languages.end()});
  std::vector<Setup> candidates;
  if (constraint.forced) {
    candidates = {*constraint.forced};
  } else {
    candidates = config_.setups;
  }
  const bool dev = has_labels(subtask, language, Subset::kDev);
  std::optional<Dataset> dev_data;
  if (dev) dev_data = load_subset(subtask, language, Subset::kDev);

  Selection s;
  s.subtask = subtask;
  s.language = std::string(language);
  s.forced = constraint.forced.has_value();
  std::map<Setup, fs::path> manifests;
  for (auto setup : candidates) {
    const auto path = best_manifest(subtask, language, setup);
    auto m = load_manifest(path);
    double score = 0.0;
    if (dev_data) {
      const auto model = load_model(path.parent_path() / m.model_path);
      ModelPredictor predictor(model);
      score = official_score(predictor, *dev_data);
      m.dev_score = score;
      persist_manifest(m, path);
    } else {
      // Without dev labels the validation score stands in.
      score = m.validation_score.value_or(0.0);
    }
    s.dev_scores[setup] = score;
    manifests[setup] = path;
  }
  s.setup = select_setup(subtask, language, s.dev_scores);
  s.manifest = fs::relative(manifests.at(s.setup), config_.work_dir).generic_string();
  s.run_name = run_name(s.setup);
  write_text(selection_file(subtask, language), to_json(s).dump(2) + "\n");
  return s;
}

Selection Experiment::load_selection(Subtask subtask,
                                     std::string_view language) const {
  const auto file = selection_file(subtask, language);
  if (!fs::is_regular_file(file)) {
    throw IoError(fmt::format("no selection for {}/{} in '{}'; run select first",
                              to_string(subtask), language, file.string()));
  }
  try {
    return selection_from_json(json::parse(read_text(file)));
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

PredictionResult Experiment::predict(Subtask subtask, std::string_view language,
                                     BackendHandle* backend) {
  const auto selection = load_selection(subtask, language);
  const auto& space = label_space(subtask);
  const auto units = load_test_units(subtask, language);
  const auto out_file = predictions_file(subtask, language);

  PredictionResult r;
  r.predictions = out_file;
  r.units = units.size();
  LabelMap predicted;
  if (backend) {
    BackendPredictor predictor(*backend, space);
    predicted = produce_predictions(predictor, units, space, out_file);
  } else {
    const auto manifest_path = config_.work_dir / selection.manifest;
    const auto m = load_manifest(manifest_path);
    const auto model = load_model(manifest_path.parent_path() / m.model_path);
    ModelPredictor predictor(model);
    predicted = produce_predictions(predictor, units, space, out_file);
  }

  const auto gold_file = labels_file(subtask, language, Subset::kTest);
  if (fs::is_regular_file(gold_file)) {
    const auto gold = parse_labels(gold_file, space);
    const auto report = score(gold, restrict_to(predicted, gold), space);
    ResultRecord record;
    record.subtask = subtask;
    record.row.language = std::string(language);
    record.row.run = selection.run_name;
    record.row.f1_macro = report.f1_macro;
    record.row.f1_micro = report.f1_micro;
    write_result_record(record,
                        results_dir() / std::string(to_string(subtask)) /
                            fmt::format("{}__{}.json", language, selection.run_name));
    r.result = record;
  }
  return r;
}

std::vector<fs::path> Experiment::run_all() {
  std::vector<fs::path> out;
  for (auto subtask : config_.subtasks) {
    const bool aug = std::find(config_.setups.begin(), config_.setups.end(),
                               Setup::kAug) != config_.setups.end();
    for (const auto& lang : config_.languages) {
      split_language(subtask, lang);
      if (aug) augment_language(subtask, lang);
    }
    for (const auto& lang : config_.languages) {
      for (auto setup : config_.setups) sweep(subtask, lang, setup);
    }
    for (const auto& lang : config_.surprise_languages) {
      sweep(subtask, lang, Setup::kMulti);
    }
    for (const auto& lang : config_.all_languages()) {
      select(subtask, lang);
      out.push_back(predict(subtask, lang).predictions);
    }
  }
  return out;
}

std::string Experiment::run_name(Setup setup) const {
  return fmt::format("{}_{}", config_.run_name_prefix, to_string(setup));
}

}  // namespace newscls
