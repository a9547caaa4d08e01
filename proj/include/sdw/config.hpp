#pragma once

// Experiment configuration: a flat `key = value` text file with dotted keys.
//
//   # comment
//   experiment.rounds = 2
//   task.0.id = room5
//   task.0.family = Room
//
// Unknown keys are rejected with a line-anchored message.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "sdw/errors.hpp"
#include "sdw/trainer.hpp"

namespace sdw {

struct ExperimentConfig {
  std::string name = "sdw";
  ExperimentPlan plan{};
  std::string similarity = "auto";  // "auto" follows the weighting strategy
  int n_seeds = 1;
  std::string output_dir = "runs";

  /// Plan for seed index k (seed = base seed + k) with the similarity rule resolved.
  ExperimentPlan plan_for_seed(int k) const {
    ExperimentPlan p = plan;
    p.seed = plan.seed + static_cast<std::uint64_t>(k);
    p.similarity_id = resolved_similarity();
    return p;
  }

  std::string resolved_similarity() const {
    if (similarity != "auto") return similarity;
    return is_similarity_strategy(plan.strategy_id) ? plan.strategy_id : "descriptor";
  }

  void validate() const {
    if (n_seeds < 1) throw ConfigError("experiment.n_seeds must be >= 1");
    if (similarity != "auto" && !is_similarity_strategy(similarity))
      throw ConfigError("unknown similarity strategy '" + similarity + "'");
    plan_for_seed(0).validate();
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct KeySpec {
  std::string key;
  std::string doc;
  Setter set;
  Getter get;
};

#define SDW_INT_KEY(K, FIELD, T, DOC)                                                                  \
  KeySpec {                                                                                           \
    K, DOC, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
      c.FIELD = parse_int<T>(k, v);                                                                   \
    },                                                                                                \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }                             \
  }
#define SDW_DBL_KEY(K, FIELD, DOC)                                                                     \
  KeySpec {                                                                                           \
    K, DOC, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
      c.FIELD = parse_double(k, v);                                                                   \
    },                                                                                                \
        [](const ExperimentConfig& c) { return fmt_double(c.FIELD); }                                 \
  }
#define SDW_BOOL_KEY(K, FIELD, DOC)                                                                    \
  KeySpec {                                                                                           \
    K, DOC, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
      c.FIELD = parse_bool(k, v);                                                                     \
    },                                                                                                \
        [](const ExperimentConfig& c) { return fmt_bool(c.FIELD); }                                   \
  }
#define SDW_STR_KEY(K, FIELD, DOC)                                                                     \
  KeySpec {                                                                                           \
    K, DOC, [](ExperimentConfig& c, const std::string&, const std::string& v) { c.FIELD = v; },       \
        [](const ExperimentConfig& c) { return c.FIELD; }                                             \
  }

inline const std::vector<KeySpec>& global_keys() {
  static const std::vector<KeySpec> keys{
      SDW_STR_KEY("experiment.name", name, "label used in reports"),
      SDW_INT_KEY("experiment.rounds", plan.rounds, int, "passes over the task list"),
      SDW_INT_KEY("experiment.steps_per_segment", plan.steps_per_segment, std::int64_t,
                  "environment steps per task segment (multiple of replay.unroll_length)"),
      SDW_INT_KEY("experiment.eval_every", plan.eval_every, std::int64_t,
                  "evaluate all tasks every N steps (divides steps_per_segment)"),
      SDW_INT_KEY("experiment.eval_episodes", plan.eval_episodes, int, "greedy episodes per task per evaluation"),
      KeySpec{"experiment.method", "sdw_full | sdw_buffer_only | sdw_loss_only | clear_fixed | ewc | naive",
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                c.plan.method = method_from_string(v);
              },
              [](const ExperimentConfig& c) { return to_string(c.plan.method); }},
      SDW_STR_KEY("experiment.strategy", plan.strategy_id, "weighting rule: gpt4o | gpt35 | glm4 | fixed"),
      SDW_STR_KEY("experiment.similarity", similarity, "similarity rule: auto | gpt4o | gpt35 | glm4 | descriptor"),
      KeySpec{"experiment.seed", "base seed; seed index k runs with seed + k",
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.plan.seed = parse_int<std::uint64_t>(k, v);
              },
              [](const ExperimentConfig& c) { return std::to_string(c.plan.seed); }},
      SDW_INT_KEY("experiment.n_seeds", n_seeds, int, "number of seeds"),
      SDW_STR_KEY("experiment.output_dir", output_dir, "artifact directory (relative paths honor SDW_OUTPUT_ROOT)"),
      SDW_INT_KEY("agent.hidden", plan.training.hidden, std::size_t, "hidden units"),
      SDW_DBL_KEY("agent.learning_rate", plan.training.learning_rate, "Adam step size"),
      SDW_DBL_KEY("agent.grad_clip", plan.training.grad_clip, "global gradient-norm clip (0 disables)"),
      SDW_DBL_KEY("loss.entropy_cost", plan.training.entropy_cost, "entropy bonus weight"),
      SDW_DBL_KEY("loss.value_loss_cost", plan.training.value_loss_cost, "baseline loss weight"),
      SDW_DBL_KEY("loss.gamma", plan.training.vtrace.gamma, "discount"),
      SDW_DBL_KEY("loss.rho_bar", plan.training.vtrace.rho_bar, "V-trace rho clip"),
      SDW_DBL_KEY("loss.c_bar", plan.training.vtrace.c_bar, "V-trace c clip"),
      SDW_DBL_KEY("loss.policy_cloning_cost", plan.training.fixed.policy_cloning_cost,
                  "fixed policy cloning cost (clear_fixed and ablations)"),
      SDW_DBL_KEY("loss.value_cloning_cost", plan.training.fixed.value_cloning_cost,
                  "fixed value cloning cost (clear_fixed and ablations)"),
      SDW_INT_KEY("replay.capacity", plan.training.replay.capacity, std::size_t, "buffer capacity in unrolls"),
      SDW_DBL_KEY("replay.p_base", plan.training.replay.p_base, "base insertion probability"),
      SDW_DBL_KEY("replay.lambda", plan.training.replay.lambda, "insertion-probability correction scale"),
      SDW_INT_KEY("replay.batch_size", plan.training.batch_size, std::size_t, "unrolls per update"),
      SDW_INT_KEY("replay.unroll_length", plan.training.unroll_length, std::size_t, "steps per unroll"),
      SDW_DBL_KEY("replay.ratio", plan.training.fixed.batch_replay_ratio, "fixed batch replay ratio"),
      SDW_DBL_KEY("replay.w_buffer", plan.training.fixed.w_buffer, "fixed old-data target"),
      SDW_BOOL_KEY("replay.decouple_buffer_target", plan.training.decouple_buffer_target,
                   "w_buffer follows mean similarity instead of the replay ratio"),
      SDW_DBL_KEY("ewc.lambda", plan.training.ewc_lambda, "EWC penalty strength"),
      SDW_INT_KEY("ewc.fisher_samples", plan.training.fisher_samples, std::size_t,
                  "transitions for the Fisher estimate"),
      SDW_INT_KEY("probe.steps", plan.training.probe_steps, int, "agent steps per similarity probe"),
  };
  return keys;
}

#undef SDW_INT_KEY
#undef SDW_DBL_KEY
#undef SDW_BOOL_KEY
#undef SDW_STR_KEY

inline void set_task_field(TaskDescriptor& t, const std::string& field, const std::string& key,
                           const std::string& v) {
  if (field == "id") t.task_id = v;
  else if (field == "family") t.family = family_from_string(v);
  else if (field == "grid_size") t.grid_size = parse_int<int>(key, v);
  else if (field == "dark") t.dark = parse_bool(key, v);
  else if (field == "monster") t.monster = parse_bool(key, v);
  else if (field == "trap") t.trap = parse_bool(key, v);
  else if (field == "lava") t.lava = parse_bool(key, v);
  else if (field == "randomized_start") t.randomized_start = parse_bool(key, v);
  else if (field == "max_steps") t.max_steps = parse_int<int>(key, v);
  else if (field == "step_penalty") t.step_penalty = parse_double(key, v);
  else throw ConfigError("unknown key '" + key + "'");
}

}  // namespace config_detail

/// Applies one key/value pair. Task entries may appear in any order; indices must end up contiguous.
inline void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                               std::map<std::size_t, TaskDescriptor>& tasks) {
  using namespace config_detail;
  static const std::regex task_re(R"(task\.(\d+)\.([a-z_]+))");
  std::smatch m;
  if (std::regex_match(key, m, task_re)) {
    const auto idx = parse_int<std::size_t>(key, m[1].str());
    auto [it, inserted] = tasks.try_emplace(idx);
    if (inserted) it->second.task_id = "task" + std::to_string(idx);
    set_task_field(it->second, m[2].str(), key, value);
    return;
  }
  for (const auto& k : global_keys()) {
    if (k.key == key) {
      k.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

/// Parses config text; `source` prefixes error messages as "source:line: ...".
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>",
                                     const std::vector<std::string>& overrides = {}) {
  ExperimentConfig cfg;
  std::map<std::size_t, TaskDescriptor> tasks;
  bool tasks_from_file = false;
  std::string line;
  int lineno = 0;
  auto handle = [&](const std::string& raw, const std::string& where) {
    const std::string s = config_detail::trim(raw);
    if (s.empty() || s[0] == '#') return;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + s + "'");
    const std::string key = config_detail::trim(s.substr(0, eq));
    const std::string value = config_detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    try {
      apply_config_value(cfg, key, value, tasks);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    handle(line, source + ":" + std::to_string(lineno));
  }
  tasks_from_file = !tasks.empty();
  for (std::size_t i = 0; i < overrides.size(); ++i) handle(overrides[i], "override " + std::to_string(i + 1));
  (void)tasks_from_file;

  std::size_t expect = 0;
  for (auto& [idx, t] : tasks) {
    if (idx != expect) throw ConfigError(source + ": task indices must be contiguous from 0 (missing task." +
                                         std::to_string(expect) + ")");
    cfg.plan.tasks.push_back(std::move(t));
    ++expect;
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in, path, overrides);
}

/// Every key with its current value; parsing the result reproduces `cfg`.
inline std::string to_config_text(const ExperimentConfig& cfg, bool with_docs = true) {
  using namespace config_detail;
  std::ostringstream os;
  std::string section;
  for (const auto& k : global_keys()) {
    const std::string sec = k.key.substr(0, k.key.find('.'));
    if (sec != section) {
      if (!section.empty()) os << '\n';
      section = sec;
    }
    if (with_docs) os << "# " << k.doc << '\n';
    os << k.key << " = " << k.get(cfg) << '\n';
  }
  for (std::size_t i = 0; i < cfg.plan.tasks.size(); ++i) {
    const auto& t = cfg.plan.tasks[i];
    const std::string p = "task." + std::to_string(i) + ".";
    os << '\n';
    os << p << "id = " << t.task_id << '\n';
    os << p << "family = " << to_string(t.family) << '\n';
    os << p << "grid_size = " << t.grid_size << '\n';
    os << p << "dark = " << fmt_bool(t.dark) << '\n';
    os << p << "monster = " << fmt_bool(t.monster) << '\n';
    os << p << "trap = " << fmt_bool(t.trap) << '\n';
    os << p << "lava = " << fmt_bool(t.lava) << '\n';
    os << p << "randomized_start = " << fmt_bool(t.randomized_start) << '\n';
    os << p << "max_steps = " << t.max_steps << '\n';
    if (t.step_penalty) os << p << "step_penalty = " << fmt_double(*t.step_penalty) << '\n';
  }
  return os.str();
}

/// Defaults plus one example task; the body of `sdw reference-config`.
inline ExperimentConfig reference_config() {
  ExperimentConfig cfg;
  TaskDescriptor room;
  room.task_id = "room5";
  room.randomized_start = true;
  cfg.plan.tasks.push_back(room);
  return cfg;
}

inline bool operator==(const TrainingConfig& a, const TrainingConfig& b) {
  return a.hidden == b.hidden && a.learning_rate == b.learning_rate && a.grad_clip == b.grad_clip &&
         a.entropy_cost == b.entropy_cost && a.value_loss_cost == b.value_loss_cost &&
         a.vtrace.gamma == b.vtrace.gamma && a.vtrace.rho_bar == b.vtrace.rho_bar && a.vtrace.c_bar == b.vtrace.c_bar &&
         a.replay.capacity == b.replay.capacity && a.replay.p_base == b.replay.p_base &&
         a.replay.lambda == b.replay.lambda && a.batch_size == b.batch_size && a.unroll_length == b.unroll_length &&
         a.fixed == b.fixed && a.decouple_buffer_target == b.decouple_buffer_target && a.ewc_lambda == b.ewc_lambda &&
         a.fisher_samples == b.fisher_samples && a.probe_steps == b.probe_steps;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  const auto& p = a.plan;
  const auto& q = b.plan;
  return a.name == b.name && a.similarity == b.similarity && a.n_seeds == b.n_seeds && a.output_dir == b.output_dir &&
         p.tasks == q.tasks && p.rounds == q.rounds && p.steps_per_segment == q.steps_per_segment &&
         p.eval_every == q.eval_every && p.eval_episodes == q.eval_episodes && p.method == q.method &&
         p.strategy_id == q.strategy_id && p.seed == q.seed && p.training == q.training;
}

}  // namespace sdw
