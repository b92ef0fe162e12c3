#include "newscls/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "newscls/error.hpp"
#include "newscls/metrics.hpp"

namespace newscls {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 9> kLanguageOrder = {
    "en", "fr", "ge", "it", "po", "ru", "ka", "gr", "es"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::size_t language_rank(const std::string& lang) {
  const auto it = std::find(kLanguageOrder.begin(), kLanguageOrder.end(), lang);
  return static_cast<std::size_t>(it - kLanguageOrder.begin());
}

bool language_less(const std::string& a, const std::string& b) {
  const auto ra = language_rank(a), rb = language_rank(b);
  if (ra != rb) return ra < rb;
  return a < b;
}

std::string trim_copy(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_score(std::string_view s, std::string_view source,
                   std::size_t line) {
  try {
    std::size_t used = 0;
    const std::string str(s);
    const double v = std::stod(str, &used);
    if (used != str.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(
        fmt::format("{}:{}: '{}' is not a score", source, line, s));
  }
}

}  // namespace

std::string render_report(Subtask subtask, const std::vector<ReportRow>& results,
                          const std::vector<ReportRow>& reference_rows,
                          ReportFormat format) {
  const auto measure = official_measure(subtask);
  const bool macro_first = measure == Measure::kF1Macro;

  std::map<std::string, std::vector<ReportRow>, decltype(&language_less)>
      blocks(&language_less);
  for (const auto* rows : {&reference_rows, &results}) {
    for (const auto& row : *rows) {
      auto copy = row;
      copy.language = lower(row.language);
      blocks[copy.language].push_back(std::move(copy));
    }
  }
  for (auto& [lang, rows] : blocks) {
    auto official = [&](const ReportRow& r) {
      return macro_first ? r.f1_macro : r.f1_micro;
    };
    // Ties share a rank: 1 + number of rows with a strictly better score.
    std::vector<int> computed(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      int better = 0;
      for (const auto& other : rows) better += official(other) > official(rows[i]);
      computed[i] = 1 + better;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].rank) rows[i].rank = computed[i];
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ReportRow& a, const ReportRow& b) {
                       return *a.rank < *b.rank;
                     });
  }

  const std::string first_header = macro_first ? "F1_macro" : "F1_micro";
  const std::string second_header = macro_first ? "F1_micro" : "F1_macro";
  auto first = [&](const ReportRow& r) { return macro_first ? r.f1_macro : r.f1_micro; };
  auto second = [&](const ReportRow& r) { return macro_first ? r.f1_micro : r.f1_macro; };

  std::string out;
  if (format == ReportFormat::kDelimited) {
    out += fmt::format("Lang\tRank\tRun\t{}\t{}\n", first_header, second_header);
    for (const auto& [lang, rows] : blocks) {
      for (const auto& r : rows) {
        out += fmt::format("{}\t{}\t{}\t{:.3f}\t{:.3f}\n", upper(lang), *r.rank,
                           r.run, first(r), second(r));
      }
    }
    return out;
  }

  std::size_t lang_w = 4, rank_w = 4, run_w = 3;
  for (const auto& [lang, rows] : blocks) {
    lang_w = std::max(lang_w, lang.size());
    for (const auto& r : rows) {
      rank_w = std::max(rank_w, fmt::format("{}", *r.rank).size());
      run_w = std::max(run_w, r.run.size());
    }
  }
  const std::size_t score_w = 8;
  const auto header = fmt::format("{:<{}}  {:>{}}  {:<{}}  {:>{}}  {:>{}}",
                                  "Lang", lang_w, "Rank", rank_w, "Run", run_w,
                                  first_header, score_w, second_header, score_w);
  const auto rule = std::string(header.size(), '-');
  out += header + "\n" + rule + "\n";
  for (const auto& [lang, rows] : blocks) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      out += fmt::format("{:<{}}  {:>{}}  {:<{}}  {:>{}.3f}  {:>{}.3f}\n",
                         i == 0 ? upper(lang) : std::string(), lang_w, *r.rank,
                         rank_w, r.run, run_w, first(r), score_w, second(r),
                         score_w);
    }
    out += rule + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_report_rows(std::string_view content,
                                         std::string_view source) {
  std::vector<ReportRow> rows;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_copy(line).empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, '\t')) fields.push_back(trim_copy(f));
    if (fields.size() != 5) {
      throw ValidationError(fmt::format("{}:{}: expected 5 fields, got {}",
                                        source, line_no, fields.size()));
    }
    ReportRow row;
    row.language = lower(fields[0]);
    if (!fields[1].empty()) {
      int rank = 0;
      const auto [ptr, ec] = std::from_chars(
          fields[1].data(), fields[1].data() + fields[1].size(), rank);
      if (ec != std::errc() || ptr != fields[1].data() + fields[1].size() ||
          rank < 1) {
        throw ValidationError(fmt::format("{}:{}: bad rank '{}'", source,
                                          line_no, fields[1]));
      }
      row.rank = rank;
    }
    row.run = fields[2];
    row.f1_macro = parse_score(fields[3], source, line_no);
    row.f1_micro = parse_score(fields[4], source, line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ReportRow> load_report_rows(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report_rows(ss.str(), file.string());
}

nlohmann::json to_json(const ResultRecord& record) {
  nlohmann::json j = {{"subtask", to_string(record.subtask)},
                      {"language", record.row.language},
                      {"run", record.row.run},
                      {"f1_macro", record.row.f1_macro},
                      {"f1_micro", record.row.f1_micro}};
  if (record.row.rank) j["rank"] = *record.row.rank;
  return j;
}

ResultRecord result_record_from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.subtask = parse_subtask(j.at("subtask").get<std::string>());
  r.row.language = j.at("language").get<std::string>();
  r.row.run = j.at("run").get<std::string>();
  r.row.f1_macro = j.at("f1_macro").get<double>();
  r.row.f1_micro = j.at("f1_micro").get<double>();
  if (j.contains("rank")) r.row.rank = j.at("rank").get<int>();
  return r;
}

void write_result_record(const ResultRecord& record, const fs::path& file) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", file.string()));
  out << to_json(record).dump(2) << "\n";
}

std::vector<ResultRecord> load_result_records(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ResultRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      out.push_back(result_record_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(fmt::format("{}: {}", f.string(), e.what()));
    }
  }
  return out;
}

}  // namespace newscls
