#pragma once

// Command-line front end. Exit codes: 0 success, 2 configuration or usage error,
// 1 runtime failure (e.g. non-finite loss).

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sdw/config.hpp"
#include "sdw/experiment.hpp"

namespace sdw {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Similarity-driven weighting for lifelong reinforcement learning"};
  app.require_subcommand(1);

  struct RunOpts {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string method, strategy, similarity, out_dir;
    int jobs = 1;
    bool quiet = false;
  };
  RunOpts ro;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("-c,--config", ro.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", ro.seed, "base seed (experiment.seed)");
    sub->add_option("--method", ro.method, "training method (experiment.method)");
    sub->add_option("--strategy", ro.strategy, "weighting strategy (experiment.strategy)");
    sub->add_option("--similarity", ro.similarity, "similarity strategy (experiment.similarity)");
    sub->add_option("--out", ro.out_dir, "output directory (experiment.output_dir)");
    sub->add_option("--set", ro.sets, "override any config key: --set key=value")->take_all();
    sub->add_option("-j,--jobs", ro.jobs, "seeds run in parallel")->check(CLI::PositiveNumber);
    sub->add_flag("-q,--quiet", ro.quiet, "suppress progress output");
  };

  auto* run_cmd = app.add_subcommand("run", "train every seed and write per-seed artifacts");
  add_run_options(run_cmd);
  auto* abl_cmd = app.add_subcommand("ablation", "run sdw_full, sdw_buffer_only, sdw_loss_only and clear_fixed");
  add_run_options(abl_cmd);

  std::string plot_path;
  auto* plot_cmd = app.add_subcommand("plot", "regenerate SVG plots from a run directory");
  plot_cmd->add_option("run_dir", plot_path, "run or seed directory")->required();

  std::string metrics_path;
  auto* metrics_cmd = app.add_subcommand("metrics", "compute P, F, T from an eval.csv");
  metrics_cmd->add_option("eval_csv", metrics_path, "path to eval.csv")->required();

  std::string ref_out;
  auto* ref_cmd = app.add_subcommand("reference-config", "print a config with every key and its default");
  ref_cmd->add_option("-o,--out", ref_out, "write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd || *abl_cmd) {
      std::vector<std::string> overrides = ro.sets;
      if (ro.seed) overrides.push_back("experiment.seed = " + std::to_string(*ro.seed));
      if (!ro.method.empty()) overrides.push_back("experiment.method = " + ro.method);
      if (!ro.strategy.empty()) overrides.push_back("experiment.strategy = " + ro.strategy);
      if (!ro.similarity.empty()) overrides.push_back("experiment.similarity = " + ro.similarity);
      if (!ro.out_dir.empty()) overrides.push_back("experiment.output_dir = " + ro.out_dir);
      const ExperimentConfig cfg = load_config(ro.config, overrides);
      const fs::path dir = resolve_output_dir(cfg.output_dir);
      ProgressSink progress;
      if (!ro.quiet) progress = [&](const std::string& msg) { err << msg << '\n'; };
      if (*run_cmd) {
        const auto results = run_experiment(cfg, dir, ro.jobs, progress);
        const auto s = summary_json(results);
        out << "P " << s["P"]["mean"].get<double>() << " +- " << s["P"]["sd"].get<double>() << '\n'
            << "F " << s["F"]["mean"].get<double>() << " +- " << s["F"]["sd"].get<double>() << '\n'
            << "T " << s["T"]["mean"].get<double>() << " +- " << s["T"]["sd"].get<double>() << '\n'
            << "artifacts in " << dir.string() << '\n';
      } else {
        const auto rows = run_ablation(cfg, dir, ro.jobs, progress);
        out << ablation_markdown(rows) << "artifacts in " << dir.string() << '\n';
      }
    } else if (*plot_cmd) {
      for (const auto& p : plot_dir(plot_path)) out << "wrote " << p.string() << '\n';
    } else if (*metrics_cmd) {
      const auto rows = read_eval_csv(fs::path(metrics_path));
      if (rows.empty()) throw UsageError(metrics_path + ": no evaluation rows");
      out << to_json(metrics_report(eval_matrix_from_records(rows))).dump(2) << '\n';
    } else if (*ref_cmd) {
      const std::string text = to_config_text(reference_config());
      if (ref_out.empty())
        out << text;
      else
        write_text(ref_out, text);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace sdw
