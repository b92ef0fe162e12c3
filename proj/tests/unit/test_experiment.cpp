#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "newscls/error.hpp"
#include "newscls/experiment.hpp"
#include "synth.hpp"

namespace newscls {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kMinimal = R"({
  "languages": ["en", "fr"],
  "surprise_languages": ["es"],
  "paths": {"data_root": "data", "work_dir": "/abs/work",
            "label_spaces": {"S1": "labels/s1.tsv", "S2": "labels/s2.tsv",
                             "S3": "labels/s3.tsv"}}
})";

TEST(Config, DefaultsAndPathResolution) {
  const auto c = parse_experiment_config(kMinimal, "/base");
  EXPECT_EQ(c.languages, (std::vector<std::string>{"en", "fr"}));
  EXPECT_EQ(c.all_languages(), (std::vector<std::string>{"en", "fr", "es"}));
  EXPECT_TRUE(c.is_known("fr"));
  EXPECT_FALSE(c.is_known("es"));
  EXPECT_EQ(c.data_root, fs::path("/base/data"));
  EXPECT_EQ(c.work_dir, fs::path("/abs/work"));
  EXPECT_EQ(c.label_spaces.at(Subtask::kS1), fs::path("/base/labels/s1.tsv"));
  EXPECT_EQ(c.root_seed, kDefaultRootSeed);
  EXPECT_EQ(c.subtasks.size(), 3u);
  EXPECT_EQ(c.setups.size(), 3u);
  EXPECT_EQ(c.train_fraction, 0.8);
  EXPECT_EQ(c.augment.seed, c.root_seed);
  EXPECT_EQ(c.run_name_prefix, "newscls");
}

TEST(Config, Overrides) {
  const auto c = parse_experiment_config(R"({
    "languages": ["en"], "subtasks": ["S3"], "setups": ["multi"],
    "root_seed": 7,
    "paths": {"data_root": "d", "work_dir": "w", "label_spaces": {"S3": "s3.tsv"}},
    "learning_rate": 0.01,
    "hyper_overrides": [{"subtask": "S3", "setup": "multi", "epochs": 2, "k_seeds": 3}],
    "augment": {"ops": ["random_swap"], "rate": 0.2, "copies": 2, "seed": 9},
    "backend": {"command": ["python3", "-m", "x"], "timeout_ms": 500}
  })", "/b");
  EXPECT_EQ(c.subtasks, std::vector<Subtask>{Subtask::kS3});
  EXPECT_EQ(c.setups, std::vector<newscls::Setup>{newscls::Setup::kMulti});
  EXPECT_EQ(c.root_seed, 7u);
  const auto& t = c.profile.at(Subtask::kS3, Setup::kMulti);
  EXPECT_EQ(t.epochs, 2);
  EXPECT_EQ(t.k_seeds, 3);
  EXPECT_EQ(t.max_seq_len, 256u);
  EXPECT_EQ(t.learning_rate, 0.01);
  EXPECT_EQ(c.augment.ops, std::vector<AugmentOp>{AugmentOp::kRandomSwap});
  EXPECT_EQ(c.augment.copies, 2);
  EXPECT_EQ(c.augment.seed, 9u);
  EXPECT_EQ(c.backend_timeout.count(), 500);
}

TEST(Config, Errors) {
  try {
    parse_experiment_config("{\"languages\": [", "/b");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
  EXPECT_THROW(parse_experiment_config(R"({"languages": ["en"], "colour": 1,
      "paths": {"data_root": "d", "work_dir": "w", "label_spaces": {}}})", "/b"),
               ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"languages": ["en", "en"],
      "paths": {"data_root": "d", "work_dir": "w", "label_spaces": {}}})", "/b"),
               ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"languages": ["en"], "subtasks": ["S4"],
      "paths": {"data_root": "d", "work_dir": "w", "label_spaces": {}}})", "/b"),
               ValidationError);
  EXPECT_THROW(load_experiment_config("/nonexistent/experiment.json"), IoError);
}

TEST(Selection, JsonRoundTrip) {
  Selection s;
  s.subtask = Subtask::kS2;
  s.language = "ka";
  s.forced = true;
  s.dev_scores = {{Setup::kMulti, 0.25}};
  s.manifest = "runs/S2/ka/multi/seed0/manifest.json";
  s.run_name = "newscls_multi";
  EXPECT_EQ(selection_from_json(to_json(s)), s);
}

// Small matrix: two training languages, one surprise language, S1 only.
class SmallExperiment : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::DeskSpec spec;
    spec.languages = {"en", "fr"};
    spec.surprise = {"es"};
    spec.train_units = 30;
    spec.dev_units = 10;
    spec.test_units = 10;
    auto cfg = load_experiment_config(testing::write_desk_experiment(dir_.path(), spec));
    cfg.subtasks = {Subtask::kS1, Subtask::kS3};
    for (auto s : cfg.subtasks) {
      for (auto setup : kAllSetups) {
        auto t = cfg.profile.at(s, setup);
        t.k_seeds = 2;
        t.epochs = 3;
        cfg.profile.set(s, setup, t);
      }
    }
    config_ = cfg;
  }

  testing::TempDir dir_{"experiment"};
  ExperimentConfig config_;
};

TEST_F(SmallExperiment, EndToEnd) {
  Experiment exp(config_, 2);
  const auto files = exp.run_all();
  EXPECT_EQ(files.size(), 6u);
  for (auto s : config_.subtasks) {
    for (const auto& lang : config_.all_languages()) {
      EXPECT_TRUE(fs::is_regular_file(exp.predictions_file(s, lang)));
      const auto sel = exp.load_selection(s, lang);
      const auto manifest = load_manifest(config_.work_dir / sel.manifest);
      EXPECT_TRUE(manifest.best);
      EXPECT_EQ(manifest.setup, sel.setup);
      // Surprise languages have no dev subset.
      EXPECT_EQ(manifest.dev_score.has_value(), config_.is_known(lang));
      if (!config_.is_known(lang)) {
        EXPECT_EQ(sel.setup, Setup::kMulti);
        EXPECT_TRUE(sel.forced);
      } else {
        EXPECT_EQ(sel.dev_scores.size(), 3u);
        double best = 0;
        for (const auto& [setup, v] : sel.dev_scores) best = std::max(best, v);
        EXPECT_EQ(sel.dev_scores.at(sel.setup), best);
      }
    }
  }
  // Surprise predictions cover the test set.
  const auto units = exp.load_test_units(Subtask::kS3, "es");
  const auto pred = parse_labels(exp.predictions_file(Subtask::kS3, "es"),
                                 exp.label_space(Subtask::kS3));
  EXPECT_EQ(pred.size(), units.size());
  EXPECT_EQ(load_result_records(exp.results_dir()).size(), 6u);
}

TEST_F(SmallExperiment, SplitIsIdempotentAndSized) {
  Experiment exp(config_);
  const auto [train, val] = exp.split_language(Subtask::kS1, "en");
  EXPECT_EQ(train.size(), 24u);
  EXPECT_EQ(val.size(), 6u);
  const auto first = slurp(exp.split_dir(Subtask::kS1, "en") / "split.json");
  exp.split_language(Subtask::kS1, "en");
  EXPECT_EQ(slurp(exp.split_dir(Subtask::kS1, "en") / "split.json"), first);
  const auto [t2, v2] = exp.load_split(Subtask::kS1, "en");
  EXPECT_EQ(t2, train);
  EXPECT_EQ(v2, val);
}

TEST_F(SmallExperiment, StageOrderErrors) {
  Experiment exp(config_);
  EXPECT_THROW(exp.load_split(Subtask::kS1, "en"), IoError);
  EXPECT_THROW(exp.sweep(Subtask::kS1, "es", Setup::kMono), ValidationError);
  EXPECT_THROW(exp.load_selection(Subtask::kS1, "en"), IoError);
  EXPECT_THROW(exp.load_subset(Subtask::kS1, "es", Subset::kTrain), IoError);
}

TEST_F(SmallExperiment, SweepRerunKeepsManifestBytes) {
  Experiment exp(config_);
  exp.split_language(Subtask::kS1, "en");
  exp.sweep(Subtask::kS1, "en", Setup::kMono);
  const auto best = exp.best_manifest(Subtask::kS1, "en", Setup::kMono);
  const auto bytes = slurp(best);
  exp.sweep(Subtask::kS1, "en", Setup::kMono);
  EXPECT_EQ(slurp(exp.best_manifest(Subtask::kS1, "en", Setup::kMono)), bytes);
  EXPECT_EQ(exp.best_manifest(Subtask::kS1, "en", Setup::kMono), best);
}

TEST_F(SmallExperiment, AugmentOnlyTouchesTrainSide) {
  Experiment exp(config_);
  const auto [train, val] = exp.split_language(Subtask::kS1, "fr");
  const auto aug = exp.augment_language(Subtask::kS1, "fr");
  EXPECT_EQ(aug.size(), 2 * train.size());
  EXPECT_EQ(exp.load_augmented(Subtask::kS1, "fr"), aug);
  const auto [t, v] = exp.sweep_data(Subtask::kS1, "fr", Setup::kAug);
  EXPECT_EQ(t, aug);
  EXPECT_EQ(v, val);
}

}  // namespace
}  // namespace newscls
