#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "newscls/corpus.hpp"

namespace newscls {

// One leaderboard line: a run's scores on one test language.
struct ReportRow {
  std::string language;
  std::optional<int> rank;  // computed from the official measure when absent
  std::string run;
  double f1_macro = 0.0;
  double f1_micro = 0.0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

enum class ReportFormat { kText, kDelimited };

// Per-language blocks (canonical order EN FR GE IT PO RU KA GR ES, then
// others alphabetically), rows ordered by rank, scores with 3 decimals and
// the subtask's official measure in the first score column.
std::string render_report(Subtask subtask, const std::vector<ReportRow>& results,
                          const std::vector<ReportRow>& reference_rows,
                          ReportFormat format = ReportFormat::kText);

// TSV `language<TAB>rank<TAB>run<TAB>f1_macro<TAB>f1_micro`; rank may be
// empty. Lines starting with '#' are comments.
std::vector<ReportRow> parse_report_rows(std::string_view content,
                                         std::string_view source = "<memory>");
std::vector<ReportRow> load_report_rows(const std::filesystem::path& file);

// Persisted evaluation result of one run on one language.
struct ResultRecord {
  Subtask subtask = Subtask::kS1;
  ReportRow row;
};

nlohmann::json to_json(const ResultRecord& record);
ResultRecord result_record_from_json(const nlohmann::json& j);
void write_result_record(const ResultRecord& record,
                         const std::filesystem::path& file);
// Every `*.json` result record below `dir`, in path order.
std::vector<ResultRecord> load_result_records(const std::filesystem::path& dir);

}  // namespace newscls
