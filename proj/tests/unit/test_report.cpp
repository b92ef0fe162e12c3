#include <gtest/gtest.h>

#include "newscls/error.hpp"
#include "newscls/report.hpp"
#include "synth.hpp"

namespace newscls {
namespace {

std::vector<ReportRow> reference(Subtask s) {
  return load_report_rows(testing::config_dir() / "reference" /
                          ("subtask" + std::to_string(static_cast<int>(s) + 1) +
                           "_official.tsv"));
}

std::vector<ReportRow> only(const std::vector<ReportRow>& rows,
                            const std::string& lang) {
  std::vector<ReportRow> out;
  for (const auto& r : rows) {
    if (r.language == lang) out.push_back(r);
  }
  return out;
}

TEST(Report, EnglishBlockGolden) {
  const auto text = render_report(Subtask::kS1, {}, only(reference(Subtask::kS1), "en"));
  const std::string expected =
      "Lang  Rank  Run         F1_macro  F1_micro\n"
      "------------------------------------------\n"
      "EN       1  MELODI         0.784     0.815\n"
      "        16  Baseline       0.288     0.611\n"
      "        17  QCRI_multi     0.281     0.593\n"
      "------------------------------------------\n";
  EXPECT_EQ(text, expected);
}

TEST(Report, FrenchBlockGolden) {
  const auto text = render_report(Subtask::kS1, {}, only(reference(Subtask::kS1), "fr"));
  const std::string expected =
      "Lang  Rank  Run       F1_macro  F1_micro\n"
      "----------------------------------------\n"
      "FR       1  UMUTeam      0.835     0.880\n"
      "         2  QCRI_aug     0.767     0.800\n"
      "        10  Baseline     0.568     0.740\n"
      "----------------------------------------\n";
  EXPECT_EQ(text, expected);
}

TEST(Report, MicroFirstForFrames) {
  const ReportRow row{"ge", std::nullopt, "QCRI_multi", 0.606, 0.660};
  const auto text = render_report(Subtask::kS2, {row}, {});
  EXPECT_NE(text.find("F1_micro  F1_macro"), std::string::npos);
  EXPECT_NE(text.find("GE       1  QCRI_multi     0.660     0.606\n"),
            std::string::npos);
}

TEST(Report, EmptyIsHeaderOnly) {
  EXPECT_EQ(render_report(Subtask::kS1, {}, {}),
            "Lang  Rank  Run  F1_macro  F1_micro\n"
            "-----------------------------------\n");
  EXPECT_EQ(render_report(Subtask::kS3, {}, {}, ReportFormat::kDelimited),
            "Lang\tRank\tRun\tF1_micro\tF1_macro\n");
}

TEST(Report, ComputedRanksAndLanguageOrder) {
  const std::vector<ReportRow> rows = {
      {"es", std::nullopt, "b", 0.2, 0.5},
      {"EN", std::nullopt, "a", 0.4, 0.1},
      {"en", std::nullopt, "c", 0.9, 0.1},
      {"en", std::nullopt, "d", 0.4, 0.2},
  };
  const auto tsv = render_report(Subtask::kS1, rows, {}, ReportFormat::kDelimited);
  EXPECT_EQ(tsv,
            "Lang\tRank\tRun\tF1_macro\tF1_micro\n"
            "EN\t1\tc\t0.900\t0.100\n"
            "EN\t2\ta\t0.400\t0.100\n"
            "EN\t2\td\t0.400\t0.200\n"
            "ES\t1\tb\t0.200\t0.500\n");
  EXPECT_EQ(render_report(Subtask::kS1, rows, {}), render_report(Subtask::kS1, rows, {}));
}

TEST(Report, FullReferenceCoversNineLanguages) {
  for (auto s : {Subtask::kS1, Subtask::kS2, Subtask::kS3}) {
    const auto text = render_report(s, {}, reference(s));
    std::size_t pos = 0;
    for (const char* lang : {"EN", "FR", "GE", "IT", "PO", "RU", "KA", "GR", "ES"}) {
      const auto at = text.find(std::string("\n") + lang + " ", pos);
      ASSERT_NE(at, std::string::npos) << lang;
      pos = at;
    }
  }
}

TEST(Report, ParseRows) {
  const auto rows = parse_report_rows("# c\nen\t\trun\t0.5\t0.25\nFR\t3\tx\t1\t0\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (ReportRow{"en", std::nullopt, "run", 0.5, 0.25}));
  EXPECT_EQ(rows[1].language, "fr");
  EXPECT_EQ(rows[1].rank, 3);
  EXPECT_THROW(parse_report_rows("en\t1\tx\t0.5\n"), ValidationError);
  EXPECT_THROW(parse_report_rows("en\t0\tx\t0.5\t0.5\n"), ValidationError);
  EXPECT_THROW(parse_report_rows("en\t1\tx\tabc\t0.5\n"), ValidationError);
}

TEST(Report, ResultRecordsRoundTrip) {
  testing::TempDir dir("report");
  const ResultRecord a{Subtask::kS2, {"it", std::nullopt, "newscls_multi", 0.4, 0.6}};
  const ResultRecord b{Subtask::kS2, {"en", 2, "newscls_mono", 0.1, 0.2}};
  write_result_record(a, dir.path() / "S2/it.json");
  write_result_record(b, dir.path() / "S2/en.json");
  const auto loaded = load_result_records(dir.path());
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].row, b.row);
  EXPECT_EQ(loaded[1].row, a.row);
  EXPECT_THROW(load_result_records(dir.path() / "none"), IoError);
}

}  // namespace
}  // namespace newscls
