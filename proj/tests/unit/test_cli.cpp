#include <algorithm>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "newscls/cli.hpp"
#include "newscls/pipeline.hpp"
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

void write(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliDesk : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::DeskSpec spec;
    spec.languages = {"en", "fr"};
    spec.surprise = {"es"};
    spec.train_units = 20;
    spec.dev_units = 6;
    spec.test_units = 6;
    config_ = testing::write_desk_experiment(dir_.path(), spec);
    auto j = nlohmann::json::parse(slurp(config_));
    j["subtasks"] = {"S1"};
    j["hyper_overrides"] = nlohmann::json::array();
    for (const char* setup : {"mono", "multi", "aug"}) {
      j["hyper_overrides"].push_back(
          {{"subtask", "S1"}, {"setup", setup}, {"epochs", 2}, {"k_seeds", 2}});
    }
    write(config_, j.dump(2));
  }

  Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), {"-c", config_.string()});
    return run(args);
  }

  testing::TempDir dir_{"cli"};
  fs::path config_;
};

TEST(Cli, HelpAndBadArgs) {
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, cli::kExitOk);
  for (const char* verb : {"split", "augment", "sweep", "select", "predict", "evaluate",
                           "report", "run"}) {
    EXPECT_NE(help.out.find(verb), std::string::npos) << verb;
  }
  EXPECT_NE(help.out.find("root_seed"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitInput);
  EXPECT_EQ(run({"split", "-s", "S1", "-l", "en"}).code, cli::kExitInput);
}

TEST_F(CliDesk, SplitRerunIsIdempotent) {
  const auto a = cli({"split", "-s", "S1", "-l", "en"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("train 16 validation 4"), std::string::npos);
  const auto split_dir = dir_.path() / "work/splits/S1/en";
  const auto before = slurp(split_dir / "split.json");
  const auto labels = slurp(split_dir / "train/labels.tsv");
  const auto b = cli({"split", "-s", "S1", "-l", "en"});
  EXPECT_EQ(b.code, 0);
  EXPECT_EQ(b.out, a.out);
  EXPECT_EQ(slurp(split_dir / "split.json"), before);
  EXPECT_EQ(slurp(split_dir / "train/labels.tsv"), labels);
}

TEST_F(CliDesk, MissingLabelsNamesPath) {
  const auto labels = dir_.path() / "data/en/train-labels-subtask-1.txt";
  fs::remove(labels);
  const auto r = cli({"split", "-s", "S1", "-l", "en"});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_NE(r.err.find(labels.string()), std::string::npos);
}

TEST_F(CliDesk, SweepPrintsBestManifestAndRepeats) {
  ASSERT_EQ(cli({"split", "-s", "S1", "-l", "en"}).code, 0);
  const auto a = cli({"sweep", "-s", "S1", "-l", "en", "--setup", "mono"});
  ASSERT_EQ(a.code, 0) << a.err;
  const fs::path best(a.out.substr(0, a.out.find('\n')));
  ASSERT_TRUE(fs::is_regular_file(best));
  EXPECT_TRUE(load_manifest(best).best);
  int runs = 0;
  for (const auto& e : fs::directory_iterator(dir_.path() / "work/runs/S1/en/mono")) {
    runs += e.is_directory();
  }
  EXPECT_EQ(runs, 2);
  const auto digest = sha256_hex(slurp(best));
  const auto b = cli({"sweep", "-s", "S1", "-l", "en", "--setup", "mono"});
  EXPECT_EQ(b.out, a.out);
  EXPECT_EQ(sha256_hex(slurp(best)), digest);
}

TEST_F(CliDesk, AllSeedsFailingIsRunFailure) {
  auto j = nlohmann::json::parse(slurp(config_));
  j["learning_rate"] = 1e308;
  write(config_, j.dump(2));
  ASSERT_EQ(cli({"split", "-s", "S1", "-l", "en"}).code, 0);
  const auto r = cli({"sweep", "-s", "S1", "-l", "en", "--setup", "mono"});
  EXPECT_EQ(r.code, cli::kExitRun);
  EXPECT_NE(r.err.find("seeds failed"), std::string::npos);
}

TEST_F(CliDesk, StagesThenReport) {
  for (const char* lang : {"en", "fr"}) {
    ASSERT_EQ(cli({"split", "-s", "S1", "-l", lang}).code, 0);
    ASSERT_EQ(cli({"augment", "-s", "S1", "-l", lang}).code, 0);
  }
  for (const char* lang : {"en", "fr"}) {
    for (const char* setup : {"mono", "multi", "aug"}) {
      ASSERT_EQ(cli({"sweep", "-s", "S1", "-l", lang, "--setup", setup}).code, 0);
    }
  }
  ASSERT_EQ(cli({"sweep", "-s", "S1", "-l", "es", "--setup", "multi"}).code, 0);
  EXPECT_EQ(cli({"sweep", "-s", "S1", "-l", "es", "--setup", "mono"}).code,
            cli::kExitInput);
  const auto sel = cli({"select", "-s", "S1", "-l", "es"});
  ASSERT_EQ(sel.code, 0) << sel.err;
  EXPECT_EQ(sel.out.substr(0, 6), "multi\n");
  ASSERT_EQ(cli({"select", "-s", "S1", "-l", "en"}).code, 0);
  const auto pred = cli({"predict", "-s", "S1", "-l", "en"});
  ASSERT_EQ(pred.code, 0) << pred.err;
  EXPECT_TRUE(fs::is_regular_file(dir_.path() / "work/predictions/S1/en.tsv"));

  const auto report = cli({"report", "-s", "S1"});
  ASSERT_EQ(report.code, 0) << report.err;
  std::size_t rows = 0;
  for (std::size_t p = report.out.find("newscls_"); p != std::string::npos;
       p = report.out.find("newscls_", p + 1)) {
    ++rows;
  }
  EXPECT_EQ(rows, 1u);
  EXPECT_NE(report.out.find("\nEN       1  newscls_"), std::string::npos);
  EXPECT_EQ(cli({"report", "-s", "S1"}).out, report.out);

  const auto gold = dir_.path() / "data/en/test-labels-subtask-1.txt";
  const auto ev = cli({"evaluate", "-s", "S1", "-g", gold.string(), "-p",
                       (dir_.path() / "work/predictions/S1/en.tsv").string()});
  EXPECT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("F1_macro"), std::string::npos);
}

TEST_F(CliDesk, RunDrivesEveryCell) {
  const auto r = cli({"-j", "2", "run"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
}

class CliEvaluate : public ::testing::Test {
 protected:
  void SetUp() override {
    write(dir_ / "space.tsv", "custom\tmultilabel\nL1\nL2\nL3\n");
    write(dir_ / "gold.tsv", "1\tL1,L2\n2\tL3\n3\t\n");
  }
  Result eval(const std::string& pred) {
    write(dir_ / "pred.tsv", pred);
    return run({"evaluate", "-s", "S2", "--label-space", (dir_ / "space.tsv").string(),
                "-g", (dir_ / "gold.tsv").string(), "-p", (dir_ / "pred.tsv").string()});
  }
  testing::TempDir dir_{"eval"};
};

TEST_F(CliEvaluate, HandCountedMicro) {
  const auto r = eval("1\tL1\n2\tL2,L3\n3\t\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("F1_micro   0.667\n"), std::string::npos);
  EXPECT_NE(r.out.find("measure    f1_micro\n"), std::string::npos);
}

TEST_F(CliEvaluate, PerfectPredictions) {
  const auto r = eval("1\tL1,L2\n2\tL3\n3\t\n");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("F1_micro   1.000\n"), std::string::npos);
  const auto partial = eval("1\tL1,L2\n2\tL3\n3\t\n");
  EXPECT_EQ(partial.out, r.out);
}

TEST_F(CliEvaluate, MissingArticleListsIds) {
  const auto r = eval("1\tL1\n3\t\n");
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_NE(r.err.find("missing"), std::string::npos);
  EXPECT_NE(r.err.find("2"), std::string::npos);
}

TEST_F(CliEvaluate, ReportSingleResult) {
  write(dir_ / "results/S1/en.json",
        R"({"subtask":"S1","language":"en","run":"solo","f1_macro":0.5,"f1_micro":0.25})");
  const auto r = run({"report", "-s", "S1", "-r", (dir_ / "results").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "Lang  Rank  Run   F1_macro  F1_micro\n"
            "------------------------------------\n"
            "EN       1  solo     0.500     0.250\n"
            "------------------------------------\n");
}

}  // namespace
}  // namespace newscls
