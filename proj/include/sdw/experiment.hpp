#pragma once

// Multi-seed experiment driver and ablation table. Each seed writes
//   <out>/seed_<k>/{eval.csv, weights.jsonl, metrics.json, curves.svg, buffer_stats.csv, checkpoint.bin}

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sdw/checkpoint.hpp"
#include "sdw/config.hpp"
#include "sdw/io.hpp"
#include "sdw/metrics.hpp"
#include "sdw/trainer.hpp"

namespace sdw {

/// Relative output directories are placed under $SDW_OUTPUT_ROOT when it is set.
inline fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("SDW_OUTPUT_ROOT"); root && *root) return fs::path(root) / p;
  }
  return p;
}

struct SeedResult {
  int index = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  RunArtifacts artifacts;
};

struct Stat {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
};

inline Stat summarize(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double acc = 0.0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

inline MetricsReport write_run_artifacts(const fs::path& dir, const RunArtifacts& art) {
  fs::create_directories(dir);
  const MetricsReport rep = metrics_report(art.eval_matrix);
  write_eval_csv(dir / "eval.csv", art.reward_curves);
  write_weights_jsonl(dir / "weights.jsonl", art.weight_log);
  write_metrics_json(dir / "metrics.json", rep);
  write_buffer_stats(dir / "buffer_stats.csv", art.buffer_stats);
  write_text(dir / "curves.svg", curves_svg(art.reward_curves, dir.filename().string()));
  if (!art.checkpoints.empty()) save_checkpoint((dir / "checkpoint.bin").string(), art.checkpoints.back(), art.total_env_steps);
  return rep;
}

using ProgressSink = std::function<void(const std::string&)>;

/// Runs seeds 0..n_seeds-1 of `cfg` on up to `jobs` threads. Results are ordered by seed index.
inline std::vector<SeedResult> run_seeds(const ExperimentConfig& cfg, const fs::path& out, int jobs = 1,
                                         const ProgressSink& progress = {}, bool keep_artifacts = false) {
  cfg.validate();
  std::vector<SeedResult> results(static_cast<std::size_t>(cfg.n_seeds));
  std::mutex mu;
  std::atomic<int> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const int k = next++;
      if (k >= cfg.n_seeds) return;
      try {
        const ExperimentPlan plan = cfg.plan_for_seed(k);
        Trainer::Progress p;
        if (progress)
          p = [&, k](const std::string& msg) {
            std::lock_guard lock(mu);
            progress("[seed " + std::to_string(k) + "] " + msg);
          };
        RunArtifacts art = Trainer(plan, p).run();
        SeedResult r;
        r.index = k;
        r.seed = plan.seed;
        r.metrics = write_run_artifacts(out / ("seed_" + std::to_string(k)), art);
        if (keep_artifacts) r.artifacts = std::move(art);
        results[static_cast<std::size_t>(k)] = std::move(r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = cfg.n_seeds;
      }
    }
  };
  const int n = std::max(1, std::min(jobs, cfg.n_seeds));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

inline json summary_json(const std::vector<SeedResult>& results) {
  std::vector<double> P, F, T;
  json seeds = json::array();
  for (const auto& r : results) {
    P.push_back(r.metrics.P);
    F.push_back(r.metrics.F);
    T.push_back(r.metrics.T);
    seeds.push_back({{"index", r.index}, {"seed", r.seed}, {"P", r.metrics.P}, {"F", r.metrics.F}, {"T", r.metrics.T}});
  }
  auto stat = [](const std::vector<double>& v) {
    const Stat s = summarize(v);
    return json{{"mean", s.mean}, {"sd", s.sd}};
  };
  return {{"n_seeds", results.size()}, {"P", stat(P)}, {"F", stat(F)}, {"T", stat(T)}, {"seeds", seeds}};
}

/// Full experiment: per-seed artifacts plus summary.json and a copy of the resolved config.
inline std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const fs::path& out, int jobs = 1,
                                              const ProgressSink& progress = {}) {
  fs::create_directories(out);
  write_text(out / "config.cfg", to_config_text(cfg, false));
  auto results = run_seeds(cfg, out, jobs, progress);
  write_text(out / "summary.json", summary_json(results).dump(2) + "\n");
  return results;
}

inline const std::vector<Method>& ablation_methods() {
  static const std::vector<Method> m{Method::SdwFull, Method::SdwBufferOnly, Method::SdwLossOnly, Method::ClearFixed};
  return m;
}

struct AblationRow {
  Method method{};
  Stat P, F, T;
  std::vector<SeedResult> seeds;
};

inline std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  auto cell = [](const Stat& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", s.mean, s.sd);
    return std::string(buf);
  };
  os << "| method | P (up) | F (down) | T (up) | seeds |\n";
  os << "|---|---|---|---|---|\n";
  for (const auto& r : rows)
    os << "| " << to_string(r.method) << " | " << cell(r.P) << " | " << cell(r.F) << " | " << cell(r.T) << " | "
       << r.seeds.size() << " |\n";
  return os.str();
}

/// The four ablation variants over the same seeds: <out>/<method>/seed_k/..., plus
/// ablation.csv, ablation_seeds.csv, ablation.md and ablation_bars.svg in <out>.
inline std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const fs::path& out, int jobs = 1,
                                             const ProgressSink& progress = {}, bool keep_artifacts = false) {
  fs::create_directories(out);
  write_text(out / "config.cfg", to_config_text(cfg, false));
  std::vector<AblationRow> rows;
  for (Method m : ablation_methods()) {
    ExperimentConfig c = cfg;
    c.plan.method = m;
    ProgressSink p;
    if (progress) p = [&, m](const std::string& msg) { progress(to_string(m) + " " + msg); };
    AblationRow row;
    row.method = m;
    row.seeds = run_seeds(c, out / to_string(m), jobs, p, keep_artifacts);
    std::vector<double> P, F, T;
    for (const auto& s : row.seeds) P.push_back(s.metrics.P), F.push_back(s.metrics.F), T.push_back(s.metrics.T);
    row.P = summarize(P);
    row.F = summarize(F);
    row.T = summarize(T);
    rows.push_back(std::move(row));
  }
  io_detail::write_file(out / "ablation.csv", [&](std::ostream& os) {
    os << "method,P_mean,P_sd,F_mean,F_sd,T_mean,T_sd,n_seeds\n";
    for (const auto& r : rows)
      os << to_string(r.method) << ',' << io_detail::num(r.P.mean) << ',' << io_detail::num(r.P.sd) << ','
         << io_detail::num(r.F.mean) << ',' << io_detail::num(r.F.sd) << ',' << io_detail::num(r.T.mean) << ','
         << io_detail::num(r.T.sd) << ',' << r.seeds.size() << '\n';
  });
  io_detail::write_file(out / "ablation_seeds.csv", [&](std::ostream& os) {
    os << "method,seed_index,seed,P,F,T\n";
    for (const auto& r : rows)
      for (const auto& s : r.seeds)
        os << to_string(r.method) << ',' << s.index << ',' << s.seed << ',' << io_detail::num(s.metrics.P) << ','
           << io_detail::num(s.metrics.F) << ',' << io_detail::num(s.metrics.T) << '\n';
  });
  write_text(out / "ablation.md", ablation_markdown(rows));
  std::vector<MethodMetrics> bars;
  for (const auto& r : rows) bars.push_back({to_string(r.method), r.P.mean, r.F.mean, r.T.mean});
  write_text(out / "ablation_bars.svg", metrics_bars_svg(bars, "ablation"));
  return rows;
}

inline std::vector<MethodMetrics> read_ablation_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("method,P_mean", 0) != 0) throw UsageError(path.string() + ": unexpected header");
  std::vector<MethodMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io_detail::split_csv(line);
    if (f.size() != 8) throw UsageError(path.string() + ": malformed row '" + line + "'");
    rows.push_back({f[0], std::stod(f[1]), std::stod(f[3]), std::stod(f[5])});
  }
  return rows;
}

/// Regenerates plots for a run directory (or a single seed directory). Returns the files written.
/// An eval.csv with no rows is an error and nothing is written.
inline std::vector<fs::path> plot_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> seed_dirs;
  if (fs::exists(dir / "eval.csv")) seed_dirs.push_back(dir);
  std::vector<fs::path> nested;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "eval.csv" && e.path().parent_path() != dir)
      nested.push_back(e.path().parent_path());
  std::sort(nested.begin(), nested.end());
  seed_dirs.insert(seed_dirs.end(), nested.begin(), nested.end());
  const bool has_ablation = fs::exists(dir / "ablation.csv");
  if (seed_dirs.empty() && !has_ablation)
    throw UsageError("no eval.csv or ablation.csv under '" + dir.string() + "'");

  // Read and validate everything before writing anything.
  std::vector<std::pair<fs::path, std::string>> outputs;
  for (const auto& d : seed_dirs) {
    const auto rows = read_eval_csv(d / "eval.csv");
    if (rows.empty()) throw UsageError((d / "eval.csv").string() + ": no evaluation rows to plot");
    outputs.emplace_back(d / "curves.svg", curves_svg(rows, d.filename().string()));
    if (fs::exists(d / "metrics.json")) {
      const auto m = read_metrics_json(d / "metrics.json");
      outputs.emplace_back(d / "metrics.svg", metrics_bars_svg({{d.filename().string(), m.P, m.F, m.T}}, "metrics"));
    }
  }
  if (has_ablation)
    outputs.emplace_back(dir / "ablation_bars.svg", metrics_bars_svg(read_ablation_csv(dir / "ablation.csv"), "ablation"));

  std::vector<fs::path> written;
  for (const auto& [path, text] : outputs) {
    write_text(path, text);
    written.push_back(path);
  }
  return written;
}

}  // namespace sdw
