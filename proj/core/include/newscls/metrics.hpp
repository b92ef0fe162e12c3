#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "newscls/corpus.hpp"

namespace newscls {

enum class Measure { kF1Macro, kF1Micro };

std::string_view to_string(Measure m);

// Ranking measure per subtask: macro-F1 for genre, micro-F1 for framing and
// persuasion techniques.
Measure official_measure(Subtask subtask);

struct LabelScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold occurrences

  friend bool operator==(const LabelScore&, const LabelScore&) = default;
};

struct EvalReport {
  std::optional<Subtask> subtask;
  double f1_macro = 0.0;
  double f1_micro = 0.0;
  std::map<std::string, LabelScore> per_label;
  std::size_t n_instances = 0;

  double value(Measure m) const {
    return m == Measure::kF1Macro ? f1_macro : f1_micro;
  }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

using SingleLabelMap = std::map<std::string, std::string>;

// One-vs-rest counts per label; macro averages every label in the space,
// zero-support labels included at 0. Micro equals accuracy. Predictions
// for unit ids absent from gold are ignored.
EvalReport score_multiclass(const SingleLabelMap& gold,
                            const SingleLabelMap& pred,
                            const LabelSpace& space);

// Micro from pooled (unit, label) pair counts; 0/0 precision or recall is
// 0, except that all-empty gold and predictions give micro-F1 = 1.
EvalReport score_multilabel(const LabelMap& gold, const LabelMap& pred,
                            const LabelSpace& space);

// Dispatches on the space kind; multiclass label sets must be singletons.
EvalReport score(const LabelMap& gold, const LabelMap& pred,
                 const LabelSpace& space);

struct OracleScores {
  double micro = 0.0;
  double macro = 0.0;
};

// Reference scorer: enumerates every (unit, label) decision literally,
// recomputing each label's counts from scratch. Exists for equivalence
// testing against the production scorers.
OracleScores oracle_score(const LabelMap& gold, const LabelMap& pred,
                          const LabelSpace& space);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

void write_eval_report(const EvalReport& report,
                       const std::filesystem::path& file);
EvalReport read_eval_report(const std::filesystem::path& file);

}  // namespace newscls
