#include <cmath>

#include <gtest/gtest.h>

#include "newscls/error.hpp"
#include "newscls/metrics.hpp"
#include "synth.hpp"

namespace newscls {
namespace {

using testing::custom_space;
using testing::official_space;

LabelSpace abc() { return LabelSpace(LabelKind::kMulticlass, {"A", "B", "C"}); }
LabelSpace l123() {
  return LabelSpace(LabelKind::kMultilabel, {"L1", "L2", "L3"});
}

TEST(Metrics, HandCountedMulticlass) {
  const SingleLabelMap gold{{"1", "A"}, {"2", "A"}, {"3", "B"}, {"4", "C"}};
  const SingleLabelMap pred{{"1", "A"}, {"2", "B"}, {"3", "B"}, {"4", "C"}};
  const auto r = score_multiclass(gold, pred, abc());
  // A: P=1 R=1/2 F=2/3; B: P=1/2 R=1 F=2/3; C: 1.
  EXPECT_NEAR(r.f1_macro, (2.0 / 3 + 2.0 / 3 + 1.0) / 3, 1e-12);
  EXPECT_NEAR(r.f1_macro, 0.7778, 1e-4);
  EXPECT_EQ(r.f1_micro, 0.75);
  EXPECT_EQ(r.per_label.at("A").support, 2u);
  EXPECT_EQ(r.n_instances, 4u);
}

TEST(Metrics, HandCountedMultilabel) {
  const LabelMap gold{{"1", {"L1", "L2"}}, {"2", {"L3"}}, {"3", {}}};
  const LabelMap pred{{"1", {"L1"}}, {"2", {"L2", "L3"}}, {"3", {}}};
  const auto r = score_multilabel(gold, pred, l123());
  EXPECT_NEAR(r.f1_micro, 2.0 / 3, 1e-12);
  EXPECT_NEAR(r.f1_micro, 0.6667, 1e-4);
  // L1: 1; L2: TP0 FP1 FN1 -> 0; L3: 1.
  EXPECT_NEAR(r.f1_macro, 2.0 / 3, 1e-12);
}

TEST(Metrics, PerfectPredictions) {
  const LabelMap gold{{"1", {"L1", "L2"}}, {"2", {"L3"}}};
  const auto r = score_multilabel(gold, gold, l123());
  EXPECT_EQ(r.f1_micro, 1.0);
  EXPECT_EQ(r.f1_macro, 1.0);
}

TEST(Metrics, AllEmptyConvention) {
  const LabelMap empty{{"1", {}}, {"2", {}}};
  const auto r = score_multilabel(empty, empty, l123());
  EXPECT_EQ(r.f1_micro, 1.0);
  EXPECT_EQ(r.f1_macro, 0.0);
  const auto o = oracle_score(empty, empty, l123());
  EXPECT_EQ(o.micro, 1.0);
  EXPECT_EQ(o.macro, 0.0);
}

TEST(Metrics, EmptyPredictionsWithGold) {
  const LabelMap gold{{"1", {"L1"}}, {"2", {"L3"}}};
  const LabelMap pred{{"1", {}}, {"2", {}}};
  EXPECT_EQ(score_multilabel(gold, pred, l123()).f1_micro, 0.0);
  EXPECT_EQ(oracle_score(gold, pred, l123()).micro, 0.0);
}

TEST(Metrics, ZeroSupportLabelsAveraged) {
  const SingleLabelMap gold{{"1", "A"}, {"2", "B"}};
  const auto r = score_multiclass(gold, gold, abc());
  EXPECT_NEAR(r.f1_macro, 2.0 / 3, 1e-12);
  EXPECT_EQ(r.per_label.size(), 3u);
}

TEST(Metrics, MissingPredictionListsIds) {
  const SingleLabelMap gold{{"1", "A"}, {"2", "B"}, {"3", "C"}};
  const SingleLabelMap pred{{"1", "A"}};
  try {
    score_multiclass(gold, pred, abc());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(Metrics, UnknownLabelRejected) {
  const LabelMap gold{{"1", {"L1"}}};
  const LabelMap pred{{"1", {"L9"}}};
  EXPECT_THROW(score_multilabel(gold, pred, l123()), ValidationError);
}

TEST(Metrics, OfficialMeasure) {
  EXPECT_EQ(official_measure(Subtask::kS1), Measure::kF1Macro);
  EXPECT_EQ(official_measure(Subtask::kS2), Measure::kF1Micro);
  EXPECT_EQ(official_measure(Subtask::kS3), Measure::kF1Micro);
}

TEST(Metrics, OracleEquivalenceProperty) {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const bool multilabel = i % 2 == 1;
    const auto n_labels = 1 + rng.below(23);
    const auto space = custom_space(
        multilabel ? LabelKind::kMultilabel : LabelKind::kMulticlass, n_labels);
    const auto [gold, pred] =
        testing::random_label_maps(space, 1 + rng.below(80), rng);
    const auto r = score(gold, pred, space);
    const auto o = oracle_score(gold, pred, space);
    ASSERT_NEAR(r.f1_micro, o.micro, 1e-12);
    ASSERT_NEAR(r.f1_macro, o.macro, 1e-12);
    ASSERT_GE(r.f1_micro, 0.0);
    ASSERT_LE(r.f1_micro, 1.0);
    ASSERT_GE(r.f1_macro, 0.0);
    ASSERT_LE(r.f1_macro, 1.0);
  }
}

TEST(Metrics, MulticlassMicroIsAccuracy) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto space = custom_space(LabelKind::kMulticlass, 2 + rng.below(10));
    const auto [gold, pred] =
        testing::random_label_maps(space, 1 + rng.below(200), rng);
    std::size_t correct = 0;
    for (const auto& [id, g] : gold) correct += pred.at(id) == g;
    const double accuracy = double(correct) / double(gold.size());
    ASSERT_EQ(score(gold, pred, space).f1_micro, accuracy);
  }
}

TEST(Metrics, ReportJsonRoundTrip) {
  const LabelMap gold{{"1", {"L1", "L2"}}, {"2", {"L3"}}};
  const LabelMap pred{{"1", {"L1"}}, {"2", {"L3"}}};
  auto r = score_multilabel(gold, pred, l123());
  r.subtask = Subtask::kS2;
  EXPECT_EQ(eval_report_from_json(to_json(r)), r);
}

TEST(Metrics, OfficialSpacesScore) {
  Rng rng(3);
  for (auto s : {Subtask::kS1, Subtask::kS2, Subtask::kS3}) {
    const auto space = official_space(s);
    const auto [gold, pred] = testing::random_label_maps(space, 50, rng);
    const auto r = score(gold, pred, space);
    EXPECT_EQ(r.per_label.size(), space.size());
  }
}

}  // namespace
}  // namespace newscls
