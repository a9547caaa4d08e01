#pragma once

// Run artifacts on disk: eval.csv, weights.jsonl, metrics.json, buffer_stats.csv
// and SVG plots.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdw/errors.hpp"
#include "sdw/metrics.hpp"
#include "sdw/trainer.hpp"

namespace sdw {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline const char* kEvalCsvHeader = "global_step,segment,train_task,eval_task,mean_return,n_episodes";
inline const char* kBufferCsvHeader = "step,size,p_old,p_insert,w_buffer";

namespace io_detail {

inline std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline void check_field(const std::string& s, const std::string& what) {
  if (s.find_first_of(",\n\"") != std::string::npos)
    throw UsageError(what + " '" + s + "' contains a character not allowed in CSV fields");
}

template <typename F>
void write_file(const fs::path& path, F&& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  body(out);
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

}  // namespace io_detail

// ---- eval.csv ---------------------------------------------------------------

inline void write_eval_csv(std::ostream& os, const std::vector<EvalRecord>& rows) {
  os << kEvalCsvHeader << '\n';
  for (const auto& r : rows) {
    io_detail::check_field(r.train_task, "task id");
    io_detail::check_field(r.eval_task, "task id");
    os << r.global_step << ',' << r.segment << ',' << r.train_task << ',' << r.eval_task << ','
       << io_detail::num(r.mean_return) << ',' << r.n_episodes << '\n';
  }
}

inline void write_eval_csv(const fs::path& path, const std::vector<EvalRecord>& rows) {
  io_detail::write_file(path, [&](std::ostream& os) { write_eval_csv(os, rows); });
}

/// Strict reader: exact header, six fields per row, fully parsed numbers.
inline std::vector<EvalRecord> read_eval_csv(std::istream& in, const std::string& source = "eval.csv") {
  std::string line;
  if (!std::getline(in, line)) throw UsageError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEvalCsvHeader) throw UsageError(source + ":1: unexpected header '" + line + "'");
  std::vector<EvalRecord> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = io_detail::split_csv(line);
    const std::string where = source + ":" + std::to_string(lineno);
    if (f.size() != 6) throw UsageError(where + ": expected 6 fields, got " + std::to_string(f.size()));
    EvalRecord r;
    try {
      std::size_t p = 0;
      r.global_step = std::stoll(f[0], &p);
      if (p != f[0].size()) throw std::invalid_argument(f[0]);
      r.segment = std::stoi(f[1], &p);
      if (p != f[1].size()) throw std::invalid_argument(f[1]);
      r.train_task = f[2];
      r.eval_task = f[3];
      r.mean_return = std::stod(f[4], &p);
      if (p != f[4].size()) throw std::invalid_argument(f[4]);
      r.n_episodes = std::stoi(f[5], &p);
      if (p != f[5].size()) throw std::invalid_argument(f[5]);
    } catch (const std::logic_error&) {
      throw UsageError(where + ": malformed row '" + line + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<EvalRecord> read_eval_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  return read_eval_csv(in, path.string());
}

/// Rebuilds the end-of-segment matrix from eval.csv rows. Task order is first appearance
/// of eval_task; column j is the last evaluation recorded during segment j.
inline EvalMatrix eval_matrix_from_records(const std::vector<EvalRecord>& rows) {
  if (rows.empty()) throw UsageError("no evaluation records");
  std::vector<std::string> tasks;
  std::map<std::string, std::size_t> index;
  int n_seg = 0;
  for (const auto& r : rows) {
    if (index.emplace(r.eval_task, tasks.size()).second) tasks.push_back(r.eval_task);
    n_seg = std::max(n_seg, r.segment);
  }
  if (n_seg < 1) throw UsageError("evaluation records contain no training segment");
  std::vector<std::int64_t> last_step(static_cast<std::size_t>(n_seg) + 1, -1);
  std::vector<std::string> seg_train(static_cast<std::size_t>(n_seg) + 1);
  for (const auto& r : rows) {
    if (r.segment < 0) throw UsageError("negative segment in evaluation records");
    auto& ls = last_step[static_cast<std::size_t>(r.segment)];
    if (r.global_step > ls) {
      ls = r.global_step;
      seg_train[static_cast<std::size_t>(r.segment)] = r.train_task;
    }
  }
  EvalMatrix m;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.r.assign(tasks.size(), std::vector<double>(static_cast<std::size_t>(n_seg) + 1, nan));
  m.all_max.assign(tasks.size(), -std::numeric_limits<double>::infinity());
  for (const auto& r : rows) {
    const auto t = index.at(r.eval_task);
    m.all_max[t] = std::max(m.all_max[t], r.mean_return);
    if (r.global_step == last_step[static_cast<std::size_t>(r.segment)])
      m.r[t][static_cast<std::size_t>(r.segment)] = r.mean_return;
  }
  for (int j = 1; j <= n_seg; ++j) {
    const auto& name = seg_train[static_cast<std::size_t>(j)];
    auto it = index.find(name);
    if (it == index.end()) throw UsageError("segment " + std::to_string(j) + " has no evaluation records");
    m.segment_task.push_back(static_cast<int>(it->second));
  }
  for (const auto& row : m.r)
    for (double v : row)
      if (std::isnan(v)) throw UsageError("evaluation records leave a gap in the segment matrix");
  return m;
}

// ---- buffer_stats.csv -------------------------------------------------------

inline void write_buffer_stats(const fs::path& path, const std::vector<BufferStatsRow>& rows) {
  io_detail::write_file(path, [&](std::ostream& os) {
    os << kBufferCsvHeader << '\n';
    for (const auto& r : rows)
      os << r.step << ',' << r.size << ',' << io_detail::num(r.p_old) << ',' << io_detail::num(r.p_insert) << ','
         << io_detail::num(r.w_buffer) << '\n';
  });
}

// ---- weights.jsonl ----------------------------------------------------------

inline json to_json(const WeightBundle& b) {
  return {{"w_buffer", b.w_buffer},
          {"batch_replay_ratio", b.batch_replay_ratio},
          {"policy_cloning_cost", b.policy_cloning_cost},
          {"value_cloning_cost", b.value_cloning_cost},
          {"strategy_id", b.strategy_id}};
}

inline WeightBundle bundle_from_json(const json& j) {
  WeightBundle b;
  b.w_buffer = j.at("w_buffer").get<double>();
  b.batch_replay_ratio = j.at("batch_replay_ratio").get<double>();
  b.policy_cloning_cost = j.at("policy_cloning_cost").get<double>();
  b.value_cloning_cost = j.at("value_cloning_cost").get<double>();
  b.strategy_id = j.at("strategy_id").get<std::string>();
  return b;
}

inline json to_json(const WeightLogEntry& e) {
  json j{{"segment", e.segment}, {"train_task", e.train_task}, {"previous_task", e.previous_task}};
  if (e.similarity) {
    j["S"] = std::vector<double>(e.similarity->s.begin(), e.similarity->s.end());
    j["similarity_strategy"] = e.similarity->strategy_id;
  } else {
    j["S"] = nullptr;
    j["similarity_strategy"] = nullptr;
  }
  j["computed"] = to_json(e.computed);
  j["applied"] = to_json(e.applied);
  return j;
}

inline void write_weights_jsonl(std::ostream& os, const std::vector<WeightLogEntry>& log) {
  for (const auto& e : log) os << to_json(e).dump() << '\n';
}

inline void write_weights_jsonl(const fs::path& path, const std::vector<WeightLogEntry>& log) {
  io_detail::write_file(path, [&](std::ostream& os) { write_weights_jsonl(os, log); });
}

inline std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// ---- metrics.json -----------------------------------------------------------

inline json to_json(const MetricsReport& m) {
  json segs = json::array();
  for (const auto& s : m.per_segment)
    segs.push_back({{"segment", s.segment},
                    {"performance", s.performance},
                    {"forgetting", s.forgetting},
                    {"transfer", s.transfer}});
  return {{"P", m.P},
          {"F", m.F},
          {"T", m.T},
          {"orientation", {{"P", "higher is better"}, {"F", "lower is better"}, {"T", "higher is better"}}},
          {"per_segment_breakdown", segs}};
}

inline void write_metrics_json(const fs::path& path, const MetricsReport& m) {
  io_detail::write_file(path, [&](std::ostream& os) { os << to_json(m).dump(2) << '\n'; });
}

inline MetricsReport read_metrics_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  const json j = json::parse(in);
  MetricsReport m;
  m.P = j.at("P").get<double>();
  m.F = j.at("F").get<double>();
  m.T = j.at("T").get<double>();
  for (const auto& s : j.at("per_segment_breakdown"))
    m.per_segment.push_back({s.at("segment").get<std::size_t>(), s.at("performance").get<double>(),
                             s.at("forgetting").get<double>(), s.at("transfer").get<double>()});
  return m;
}

// ---- SVG ----------------------------------------------------------------------

namespace svg_detail {

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return p;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string f3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace svg_detail

/// Reward curves: one polyline per evaluated task, a vertical rule at every segment boundary
/// (including step 0 and the final step).
inline std::string curves_svg(const std::vector<EvalRecord>& rows, const std::string& title = "reward curves") {
  using namespace svg_detail;
  if (rows.empty()) throw UsageError("curves_svg: no evaluation records");
  std::vector<std::string> tasks;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::map<int, std::int64_t> seg_end;
  double x_max = 1, y_min = 0, y_max = 1;
  for (const auto& r : rows) {
    if (!series.count(r.eval_task)) tasks.push_back(r.eval_task);
    series[r.eval_task].emplace_back(static_cast<double>(r.global_step), r.mean_return);
    auto& e = seg_end[r.segment];
    e = std::max(e, r.global_step);
    x_max = std::max(x_max, static_cast<double>(r.global_step));
    y_min = std::min(y_min, r.mean_return);
    y_max = std::max(y_max, r.mean_return);
  }
  // Boundaries: step 0 plus the end of each training segment.
  std::vector<std::int64_t> bounds{0};
  for (const auto& [seg, step] : seg_end)
    if (seg > 0) bounds.push_back(step);

  constexpr double W = 800, H = 420, L = 60, R = 160, T = 40, B = 50;
  auto X = [&](double x) { return L + (W - L - R) * x / x_max; };
  auto Y = [&](double y) { return T + (H - T - B) * (1.0 - (y - y_min) / (y_max - y_min)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title) << "</text>\n";
  os << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  for (double y : {y_min, 0.0, y_max}) {
    os << "<text x=\"" << L - 6 << "\" y=\"" << f3(Y(y) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
       << "font-size=\"10\">" << f3(y) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">environment steps</text>\n";
  for (auto b : bounds)
    os << "<line class=\"boundary\" x1=\"" << f3(X(b)) << "\" y1=\"" << T << "\" x2=\"" << f3(X(b)) << "\" y2=\""
       << H - B << "\" stroke=\"#999\" stroke-dasharray=\"4,3\"/>\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& color = palette()[i % palette().size()];
    auto pts = series[tasks[i]];
    std::stable_sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first < b.first; });
    os << "<polyline class=\"curve\" data-task=\"" << escape(tasks[i]) << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k)
      os << (k ? " " : "") << f3(X(pts[k].first)) << ',' << f3(Y(pts[k].second));
    os << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(i);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << escape(tasks[i]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

struct MethodMetrics {
  std::string method;
  double P = 0, F = 0, T = 0;
};

/// Grouped bars of P, F and T per method.
inline std::string metrics_bars_svg(const std::vector<MethodMetrics>& rows, const std::string& title = "metrics") {
  using namespace svg_detail;
  if (rows.empty()) throw UsageError("metrics_bars_svg: no rows");
  double lo = 0, hi = 0;
  for (const auto& r : rows)
    for (double v : {r.P, r.F, r.T}) lo = std::min(lo, v), hi = std::max(hi, v);
  if (hi == lo) hi = lo + 1;
  constexpr double W = 760, H = 380, L = 60, R = 20, T = 40, B = 60;
  const double group_w = (W - L - R) / static_cast<double>(rows.size());
  const double bar_w = group_w / 4.0;
  auto Y = [&](double y) { return T + (H - T - B) * (hi - y) / (hi - lo); };
  const char* names[3] = {"P", "F", "T"};
  const char* colors[3] = {"#1f77b4", "#d62728", "#2ca02c"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title)
     << " (P up, F down, T up)</text>\n";
  os << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << f3(Y(0)) << "\" x2=\"" << W - R << "\" y2=\"" << f3(Y(0))
     << "\" stroke=\"black\"/>\n";
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const double x0 = L + group_w * static_cast<double>(g) + bar_w / 2;
    const double vals[3] = {rows[g].P, rows[g].F, rows[g].T};
    for (int k = 0; k < 3; ++k) {
      const double y = Y(std::max(0.0, vals[k]));
      const double h = std::abs(Y(vals[k]) - Y(0));
      os << "<rect class=\"bar\" data-method=\"" << escape(rows[g].method) << "\" data-metric=\"" << names[k]
         << "\" x=\"" << f3(x0 + bar_w * k) << "\" y=\"" << f3(y) << "\" width=\"" << f3(bar_w * 0.9)
         << "\" height=\"" << f3(h) << "\" fill=\"" << colors[k] << "\"><title>" << names[k] << " = "
         << io_detail::num(vals[k]) << "</title></rect>\n";
    }
    os << "<text x=\"" << f3(x0 + bar_w * 1.5) << "\" y=\"" << H - B + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << escape(rows[g].method)
       << "</text>\n";
  }
  for (int k = 0; k < 3; ++k)
    os << "<text x=\"" << W - R - 120 + 40 * k << "\" y=\"" << H - 14 << "\" font-family=\"sans-serif\" "
       << "font-size=\"11\" fill=\"" << colors[k] << "\">" << names[k] << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  io_detail::write_file(path, [&](std::ostream& os) { os << text; });
}

}  // namespace sdw
