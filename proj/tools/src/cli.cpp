#include "newscls/cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <glog/logging.h>

#include "newscls/error.hpp"
#include "newscls/experiment.hpp"
#include "newscls/metrics.hpp"
#include "newscls/report.hpp"

namespace newscls::cli {

namespace fs = std::filesystem;

namespace {

struct CommandContext {
  std::string config_path;
  std::string work_dir;
  int verbosity = 0;
  std::optional<std::uint64_t> seed;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<ExperimentConfig> config;

  const ExperimentConfig& require_config() const {
    if (!config) throw ValidationError("this command needs --config");
    return *config;
  }
};

struct CellArgs {
  std::string subtask;
  std::string language;
  std::string setup;
};

void add_cell_options(CLI::App* cmd, CellArgs& args, bool with_setup) {
  cmd->add_option("-s,--subtask", args.subtask, "Subtask: S1, S2 or S3")
      ->required();
  cmd->add_option("-l,--language", args.language, "Language code, e.g. en")
      ->required();
  if (with_setup) {
    cmd->add_option("--setup", args.setup, "Training setup: mono, multi or aug")
        ->required();
  }
}

void configure_logging(int verbosity) {
  FLAGS_logtostderr = true;
  FLAGS_minloglevel = verbosity > 0 ? google::GLOG_INFO : google::GLOG_WARNING;
  FLAGS_v = verbosity > 1 ? verbosity - 1 : 0;
}

void print_report(std::ostream& out, const EvalReport& r, const LabelSpace& space) {
  const auto measure = space.subtask() ? official_measure(*space.subtask())
                       : space.multilabel() ? Measure::kF1Micro
                                            : Measure::kF1Macro;
  if (r.subtask) fmt::print(out, "subtask    {}\n", to_string(*r.subtask));
  fmt::print(out, "measure    {}\n", to_string(measure));
  fmt::print(out, "instances  {}\n", r.n_instances);
  fmt::print(out, "F1_macro   {:.3f}\n", r.f1_macro);
  fmt::print(out, "F1_micro   {:.3f}\n", r.f1_micro);
  std::size_t width = 5;
  for (const auto& l : space.labels()) width = std::max(width, l.size());
  fmt::print(out, "\n{:<{}}  {:>9}  {:>6}  {:>6}  {:>7}\n", "label", width,
             "precision", "recall", "f1", "support");
  for (const auto& l : space.labels()) {
    const auto it = r.per_label.find(l);
    if (it == r.per_label.end()) continue;
    const auto& s = it->second;
    fmt::print(out, "{:<{}}  {:>9.3f}  {:>6.3f}  {:>6.3f}  {:>7}\n", l, width,
               s.precision, s.recall, s.f1, s.support);
  }
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Multilingual news classification experiments", "newscls"};
  app.require_subcommand(1);
  app.footer(
      "Config keys (JSON):\n"
      "  languages, surprise_languages   language codes\n"
      "  subtasks                        S1 S2 S3\n"
      "  setups                          mono multi aug\n"
      "  root_seed                       default 20230301\n"
      "  paths.data_root, paths.work_dir\n"
      "  paths.label_spaces.{S1,S2,S3}   label space files\n"
      "  paths.lexicons.<lang>           synonym lexicons\n"
      "  paths.backend_registry          language -> model TSV\n"
      "  split.train_fraction            default 0.8\n"
      "  featurizer.{hash_dim,ngram_min,ngram_max,lowercase}\n"
      "  learning_rate, tune_thresholds\n"
      "  hyper_overrides[]               {subtask, setup, epochs, k_seeds,\n"
      "                                   max_seq_len, batch_size, learning_rate}\n"
      "  augment.{ops,rate,copies,seed}\n"
      "  backend.{command,timeout_ms}\n"
      "  run_name_prefix\n"
      "Exit codes: 0 ok, 2 input or validation error, 3 run failure.");
  CommandContext ctx;
  app.add_option("-c,--config", ctx.config_path, "Experiment config (JSON)");
  app.add_option("-w,--workdir", ctx.work_dir,
                 "Work directory (overrides paths.work_dir)");
  app.add_flag("-v,--verbose", ctx.verbosity, "More logging; repeat for more");
  app.add_option("--seed", ctx.seed, "Root seed override");
  app.add_option("-j,--jobs", ctx.jobs, "Worker threads (default: all cores)")
      ->check(CLI::PositiveNumber);

  CellArgs cell;
  auto* split_cmd = app.add_subcommand("split", "80/20 split of a train subset");
  add_cell_options(split_cmd, cell, false);

  auto* augment_cmd =
      app.add_subcommand("augment", "Augment the train side of a split");
  add_cell_options(augment_cmd, cell, false);

  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Train k seeds and print the best manifest path");
  add_cell_options(sweep_cmd, cell, true);

  auto* select_cmd =
      app.add_subcommand("select", "Pick the setup with the best dev score");
  add_cell_options(select_cmd, cell, false);

  bool use_backend = false;
  auto* predict_cmd = app.add_subcommand(
      "predict", "Write predictions of the selected model on the test subset");
  add_cell_options(predict_cmd, cell, false);
  predict_cmd->add_flag("--backend", use_backend,
                        "Classify with the configured backend process");

  std::string gold_path, pred_path, eval_subtask, label_space_path, json_path;
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Score a predictions file against gold");
  evaluate_cmd->add_option("-g,--gold", gold_path, "Gold labels file")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("-p,--pred", pred_path, "Predictions file")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("-s,--subtask", eval_subtask, "Subtask: S1, S2 or S3")
      ->required();
  evaluate_cmd->add_option("--label-space", label_space_path,
                           "Label space file (default: from the config)");
  evaluate_cmd->add_option("--json", json_path, "Also write the report as JSON");

  std::string results_dir, report_subtask, format = "text";
  std::vector<std::string> reference_files;
  auto* report_cmd =
      app.add_subcommand("report", "Leaderboard table from result records");
  report_cmd->add_option("-s,--subtask", report_subtask, "Subtask: S1, S2 or S3")
      ->required();
  report_cmd->add_option("-r,--results", results_dir,
                         "Results directory (default: <workdir>/results)");
  report_cmd->add_option("--reference", reference_files,
                         "Reference rows (TSV) merged into the table");
  report_cmd->add_option("--format", format, "text or tsv")
      ->check(CLI::IsMember({"text", "tsv"}));

  auto* run_cmd = app.add_subcommand(
      "run", "Every stage for every configured subtask and language");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  configure_logging(ctx.verbosity);

  try {
    if (!ctx.config_path.empty()) {
      ctx.config = load_experiment_config(ctx.config_path);
      if (!ctx.work_dir.empty()) ctx.config->work_dir = ctx.work_dir;
      if (ctx.seed) {
        ctx.config->root_seed = *ctx.seed;
        if (ctx.config->augment.seed == kDefaultRootSeed) {
          ctx.config->augment.seed = *ctx.seed;
        }
      }
    }

    if (evaluate_cmd->parsed()) {
      const auto subtask = parse_subtask(eval_subtask);
      LabelSpace space;
      if (!label_space_path.empty()) {
        space = load_label_space(label_space_path);
      } else {
        Experiment exp(ctx.require_config(), ctx.jobs);
        space = exp.label_space(subtask);
      }
      const auto gold = parse_labels(gold_path, space);
      const auto pred = parse_labels(pred_path, space);
      std::vector<std::string> missing, extra;
      for (const auto& [id, _] : gold) {
        if (!pred.count(id)) missing.push_back(id);
      }
      for (const auto& [id, _] : pred) {
        if (!gold.count(id)) extra.push_back(id);
      }
      if (!missing.empty()) {
        throw ValidationError(
            fmt::format("predictions missing for: {}", join_ids(missing)));
      }
      if (!extra.empty()) {
        throw ValidationError(
            fmt::format("predictions for unknown units: {}", join_ids(extra)));
      }
      auto report = score(gold, pred, space);
      report.subtask = subtask;
      print_report(out, report, space);
      if (!json_path.empty()) write_eval_report(report, json_path);
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      const auto subtask = parse_subtask(report_subtask);
      fs::path dir = results_dir;
      if (dir.empty()) {
        if (!ctx.work_dir.empty()) {
          dir = fs::path(ctx.work_dir) / "results";
        } else {
          dir = ctx.require_config().work_dir / "results";
        }
      }
      std::vector<ReportRow> rows;
      for (const auto& r : load_result_records(dir)) {
        if (r.subtask == subtask) rows.push_back(r.row);
      }
      std::vector<ReportRow> reference;
      for (const auto& f : reference_files) {
        const auto more = load_report_rows(f);
        reference.insert(reference.end(), more.begin(), more.end());
      }
      out << render_report(subtask, rows, reference,
                           format == "tsv" ? ReportFormat::kDelimited
                                           : ReportFormat::kText);
      return kExitOk;
    }

    Experiment exp(ctx.require_config(), ctx.jobs);
    if (run_cmd->parsed()) {
      for (const auto& p : exp.run_all()) out << p.string() << "\n";
      return kExitOk;
    }

    const auto subtask = parse_subtask(cell.subtask);
    if (split_cmd->parsed()) {
      const auto [train, validation] = exp.split_language(subtask, cell.language);
      fmt::print(out, "{}\ntrain {} validation {}\n",
                 exp.split_dir(subtask, cell.language).string(), train.size(),
                 validation.size());
    } else if (augment_cmd->parsed()) {
      const auto augmented = exp.augment_language(subtask, cell.language);
      fmt::print(out, "{}\ninstances {}\n",
                 (exp.augmented_dir(subtask, cell.language) / "train").string(),
                 augmented.size());
    } else if (sweep_cmd->parsed()) {
      const auto outcome =
          exp.sweep(subtask, cell.language, parse_setup(cell.setup));
      out << outcome.manifest_paths[outcome.best_index].string() << "\n";
    } else if (select_cmd->parsed()) {
      const auto s = exp.select(subtask, cell.language);
      fmt::print(out, "{}\n", to_string(s.setup));
      for (const auto& [setup, score] : s.dev_scores) {
        fmt::print(out, "{} {:.6f}\n", to_string(setup), score);
      }
    } else if (predict_cmd->parsed()) {
      std::unique_ptr<BackendHandle> backend;
      if (use_backend) {
        const auto& cfg = ctx.require_config();
        if (cfg.backend_command.empty()) {
          throw ValidationError("backend.command is not configured");
        }
        const auto selection = exp.load_selection(subtask, cell.language);
        const auto registry = cfg.backend_registry.empty()
                                  ? default_registry()
                                  : load_registry(cfg.backend_registry);
        const auto key =
            selection.setup == Setup::kMulti ? std::string("multi") : cell.language;
        const auto it = registry.find(key);
        if (it == registry.end()) {
          throw ValidationError(fmt::format("backend registry has no '{}'", key));
        }
        backend = connect_backend(
            {cfg.backend_command, it->second, cfg.backend_timeout});
      }
      const auto r = exp.predict(subtask, cell.language, backend.get());
      out << r.predictions.string() << "\n";
    }
    return kExitOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRun;
  }
}

}  // namespace newscls::cli
