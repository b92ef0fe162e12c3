#include "newscls/metrics.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "newscls/error.hpp"

namespace newscls {

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

// F1 from counts; equals 2PR / (P + R) and keeps multiclass micro-F1
// bitwise equal to accuracy (2c / 2n rounds like c / n).
double f1_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  return safe_div(2.0 * double(tp), 2.0 * double(tp) + double(fp + fn));
}

void require_coverage(const std::vector<std::string>& missing) {
  if (missing.empty()) return;
  std::string list;
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
    if (i) list += ", ";
    list += missing[i];
  }
  if (missing.size() > 20) list += fmt::format(", ... ({} total)", missing.size());
  throw ValidationError(fmt::format("missing predictions for: {}", list));
}

void check_labels(const LabelSet& labels, const LabelSpace& space,
                  std::string_view unit, std::string_view side) {
  for (const auto& l : labels) {
    if (!space.contains(l)) {
      throw ValidationError(fmt::format("{} for unit '{}': unknown label '{}'",
                                        side, unit, l));
    }
  }
}

struct Counts {
  std::vector<std::size_t> tp, fp, fn;
  explicit Counts(std::size_t n) : tp(n, 0), fp(n, 0), fn(n, 0) {}
};

EvalReport finish(const Counts& c, const LabelSpace& space, std::size_t n,
                  bool all_empty) {
  EvalReport rep;
  rep.subtask = space.subtask();
  rep.n_instances = n;
  std::size_t tp = 0, fp = 0, fn = 0;
  double macro = 0.0;
  for (std::size_t l = 0; l < space.size(); ++l) {
    LabelScore s;
    s.precision = safe_div(double(c.tp[l]), double(c.tp[l] + c.fp[l]));
    s.recall = safe_div(double(c.tp[l]), double(c.tp[l] + c.fn[l]));
    s.f1 = f1_counts(c.tp[l], c.fp[l], c.fn[l]);
    s.support = c.tp[l] + c.fn[l];
    macro += s.f1;
    rep.per_label[space.label(l)] = s;
    tp += c.tp[l];
    fp += c.fp[l];
    fn += c.fn[l];
  }
  rep.f1_macro = macro / static_cast<double>(space.size());
  if (all_empty) {
    rep.f1_micro = 1.0;
  } else {
    rep.f1_micro = f1_counts(tp, fp, fn);
  }
  return rep;
}

}  // namespace

std::string_view to_string(Measure m) {
  return m == Measure::kF1Macro ? "f1_macro" : "f1_micro";
}

Measure official_measure(Subtask subtask) {
  return subtask == Subtask::kS1 ? Measure::kF1Macro : Measure::kF1Micro;
}

EvalReport score_multiclass(const SingleLabelMap& gold,
                            const SingleLabelMap& pred,
                            const LabelSpace& space) {
  std::vector<std::string> missing;
  for (const auto& [unit, _] : gold) {
    if (!pred.count(unit)) missing.push_back(unit);
  }
  require_coverage(missing);
  Counts c(space.size());
  for (const auto& [unit, g] : gold) {
    const auto gi = space.index_of(g);
    if (!gi) {
      throw ValidationError(
          fmt::format("gold for unit '{}': unknown label '{}'", unit, g));
    }
    const auto& p = pred.at(unit);
    const auto pi = space.index_of(p);
    if (!pi) {
      throw ValidationError(
          fmt::format("prediction for unit '{}': unknown label '{}'", unit, p));
    }
    if (*gi == *pi) {
      ++c.tp[*gi];
    } else {
      ++c.fn[*gi];
      ++c.fp[*pi];
    }
  }
  return finish(c, space, gold.size(), false);
}

EvalReport score_multilabel(const LabelMap& gold, const LabelMap& pred,
                            const LabelSpace& space) {
  std::vector<std::string> missing;
  for (const auto& [unit, _] : gold) {
    if (!pred.count(unit)) missing.push_back(unit);
  }
  require_coverage(missing);
  Counts c(space.size());
  bool all_empty = true;
  for (const auto& [unit, g] : gold) {
    const auto& p = pred.at(unit);
    check_labels(g, space, unit, "gold");
    check_labels(p, space, unit, "prediction");
    if (!g.empty() || !p.empty()) all_empty = false;
    for (const auto& l : g) {
      const auto i = *space.index_of(l);
      if (p.count(l)) {
        ++c.tp[i];
      } else {
        ++c.fn[i];
      }
    }
    for (const auto& l : p) {
      if (!g.count(l)) ++c.fp[*space.index_of(l)];
    }
  }
  return finish(c, space, gold.size(), all_empty);
}

EvalReport score(const LabelMap& gold, const LabelMap& pred,
                 const LabelSpace& space) {
  if (space.multilabel()) return score_multilabel(gold, pred, space);
  SingleLabelMap g, p;
  for (const auto& [unit, labels] : gold) {
    if (labels.size() != 1) {
      throw ValidationError(fmt::format(
          "gold for unit '{}' must have exactly one label", unit));
    }
    g[unit] = *labels.begin();
  }
  for (const auto& [unit, labels] : pred) {
    if (labels.size() != 1) {
      throw ValidationError(fmt::format(
          "prediction for unit '{}' must have exactly one label", unit));
    }
    p[unit] = *labels.begin();
  }
  return score_multiclass(g, p, space);
}

OracleScores oracle_score(const LabelMap& gold, const LabelMap& pred,
                          const LabelSpace& space) {
  for (const auto& [unit, g] : gold) {
    const auto it = pred.find(unit);
    if (it == pred.end()) {
      throw ValidationError(fmt::format("missing predictions for: {}", unit));
    }
    check_labels(g, space, unit, "gold");
    check_labels(it->second, space, unit, "prediction");
  }
  // Micro: one pass over every (unit, label) decision in the cross product.
  long long tp = 0, fp = 0, fn = 0, decisions_with_any = 0;
  for (const auto& [unit, g] : gold) {
    const auto& p = pred.at(unit);
    for (const auto& label : space.labels()) {
      const bool in_gold = g.find(label) != g.end();
      const bool in_pred = p.find(label) != p.end();
      if (in_gold && in_pred) ++tp;
      if (!in_gold && in_pred) ++fp;
      if (in_gold && !in_pred) ++fn;
      if (in_gold || in_pred) ++decisions_with_any;
    }
  }
  OracleScores out;
  if (decisions_with_any == 0) {
    out.micro = 1.0;
  } else {
    const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
    out.micro = precision + recall == 0.0
                    ? 0.0
                    : 2.0 * precision * recall / (precision + recall);
  }
  // Macro: for each label, rebuild the gold and predicted unit sets.
  double sum = 0.0;
  for (const auto& label : space.labels()) {
    std::vector<std::string> gold_units, pred_units;
    for (const auto& [unit, g] : gold) {
      if (g.count(label)) gold_units.push_back(unit);
      if (pred.at(unit).count(label)) pred_units.push_back(unit);
    }
    long long both = 0;
    for (const auto& u : gold_units) {
      for (const auto& v : pred_units) both += (u == v);
    }
    const double precision =
        pred_units.empty() ? 0.0 : double(both) / double(pred_units.size());
    const double recall =
        gold_units.empty() ? 0.0 : double(both) / double(gold_units.size());
    sum += precision + recall == 0.0
               ? 0.0
               : 2.0 * precision * recall / (precision + recall);
  }
  out.macro = sum / double(space.size());
  return out;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["subtask"] = report.subtask ? std::string(to_string(*report.subtask))
                                : std::string("custom");
  j["f1_macro"] = report.f1_macro;
  j["f1_micro"] = report.f1_micro;
  j["n_instances"] = report.n_instances;
  auto& per = j["per_label"];
  per = nlohmann::json::object();
  for (const auto& [label, s] : report.per_label) {
    per[label] = {{"precision", s.precision},
                  {"recall", s.recall},
                  {"f1", s.f1},
                  {"support", s.support}};
  }
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  const auto subtask = j.at("subtask").get<std::string>();
  if (subtask != "custom") r.subtask = parse_subtask(subtask);
  r.f1_macro = j.at("f1_macro").get<double>();
  r.f1_micro = j.at("f1_micro").get<double>();
  r.n_instances = j.at("n_instances").get<std::size_t>();
  for (const auto& [label, s] : j.at("per_label").items()) {
    r.per_label[label] = {s.at("precision").get<double>(),
                          s.at("recall").get<double>(),
                          s.at("f1").get<double>(),
                          s.at("support").get<std::size_t>()};
  }
  return r;
}

void write_eval_report(const EvalReport& report,
                       const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", file.string()));
  out << to_json(report).dump(2) << "\n";
}

EvalReport read_eval_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot read '{}'", file.string()));
  try {
    return eval_report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

}  // namespace newscls
