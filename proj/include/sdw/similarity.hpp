#pragma once

// Task similarity S = [state, policy, value], each in [0, 1].
//
// Three strategies consume empirical probes (rollouts of the current agent):
//   gpt4o  Jensen-Shannon distances on mean frames and policies, baseline gap
//   gpt35  one cosine similarity over [probs, baseline, frame, return], replicated
//   glm4   [cosine(policy), Jaccard(action sets), relative baseline gap]
// and one consumes static task descriptors:
//   descriptor  1 - mean |feature difference| over per-aspect feature groups

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sdw/agent.hpp"
#include "sdw/env.hpp"
#include "sdw/errors.hpp"
#include "sdw/rng.hpp"

namespace sdw {

struct ProbeSummary {
  std::string task_id;
  std::vector<double> mean_frame;
  std::vector<double> mean_policy_probs;
  double mean_baseline = 0.0;
  std::set<int> action_set;
  double mean_episode_return = 0.0;  // completed episodes only; 0 when none finished
  int episodes_completed = 0;
  int steps = 0;

  bool operator==(const ProbeSummary&) const = default;
};

struct SimilarityVector {
  std::array<double, 3> s{1.0, 1.0, 1.0};
  std::string strategy_id;

  double state() const { return s[0]; }
  double policy() const { return s[1]; }
  double value() const { return s[2]; }
  double mean() const { return (s[0] + s[1] + s[2]) / 3.0; }
};

inline constexpr int kDefaultProbeSteps = 512;

/// Rolls the agent (sampled actions) for K steps across fresh episodes and averages
/// observations, softmax policies and baselines.
inline ProbeSummary collect_probe(GridEnv& env, const AgentParams& params, int steps, std::uint64_t seed) {
  if (steps < 1) throw UsageError("collect_probe: K must be >= 1");
  ProbeSummary ps;
  ps.task_id = env.descriptor().task_id;
  ps.steps = steps;
  ps.mean_frame.assign(env.obs_dim(), 0.0);
  ps.mean_policy_probs.assign(params.shape().actions, 0.0);

  Rng rng(mix_seed(seed, stream::kProbe));
  std::uint64_t episode = 0;
  Observation obs = env.reset(mix_seed(seed, stream::kProbe, episode++));
  double ret = 0.0;
  double ret_sum = 0.0;
  for (int k = 0; k < steps; ++k) {
    const auto f = forward(params, obs);
    for (auto j : obs.active()) ps.mean_frame[j] += 1.0;
    for (std::size_t a = 0; a < f.policy_probs.size(); ++a) ps.mean_policy_probs[a] += f.policy_probs[a];
    ps.mean_baseline += f.baseline;
    const int action = sample_action(f.policy_probs, rng);
    ps.action_set.insert(action);
    auto res = env.step(action);
    ret += res.reward;
    if (res.done) {
      ret_sum += ret;
      ret = 0.0;
      ++ps.episodes_completed;
      obs = env.reset(mix_seed(seed, stream::kProbe, episode++));
    } else {
      obs = std::move(res.observation);
    }
  }
  const double inv = 1.0 / steps;
  for (double& v : ps.mean_frame) v *= inv;
  for (double& v : ps.mean_policy_probs) v *= inv;
  ps.mean_baseline *= inv;
  if (ps.episodes_completed > 0) ps.mean_episode_return = ret_sum / ps.episodes_completed;
  return ps;
}

/// sqrt of the base-2 Jensen-Shannon divergence after L1-normalizing both inputs.
/// Two all-zero inputs are at distance 0; exactly one all-zero input is an error.
inline double js_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw UsageError("js_distance: length mismatch");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] < 0.0 || q[k] < 0.0) throw NumericalError("js_distance: negative entry");
  if (sp == 0.0 && sq == 0.0) return 0.0;
  if (sp == 0.0 || sq == 0.0) throw NumericalError("js_distance: degenerate (all-zero) distribution");
  double js = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double a = p[k] / sp;
    const double b = q[k] / sq;
    const double m = 0.5 * (a + b);
    if (a > 0.0) js += 0.5 * a * std::log(a / m);
    if (b > 0.0) js += 0.5 * b * std::log(b / m);
  }
  js /= std::log(2.0);
  return std::sqrt(std::max(0.0, js));
}

/// Cosine similarity; two zero vectors count as identical, one zero vector as orthogonal.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::min(1.0, dot / std::sqrt(na * nb));
}

inline double jaccard(const std::set<int>& a, const std::set<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (int x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double clamp01(double v) { return std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0); }

namespace detail {
inline void check_probe_shapes(const ProbeSummary& a, const ProbeSummary& b) {
  if (a.mean_frame.size() != b.mean_frame.size() || a.mean_policy_probs.size() != b.mean_policy_probs.size())
    throw UsageError("similarity: probe summaries have mismatched shapes (" + a.task_id + " vs " + b.task_id + ")");
}
}  // namespace detail

inline SimilarityVector similarity_gpt4o(const ProbeSummary& p1, const ProbeSummary& p2) {
  detail::check_probe_shapes(p1, p2);
  SimilarityVector out;
  out.strategy_id = "gpt4o";
  out.s[0] = clamp01(1.0 - js_distance(p1.mean_frame, p2.mean_frame));
  out.s[1] = clamp01(1.0 - js_distance(p1.mean_policy_probs, p2.mean_policy_probs));
  out.s[2] = clamp01(1.0 - std::abs(p1.mean_baseline - p2.mean_baseline));
  return out;
}

/// Probe feature layout shared by both sides: [probs (A), baseline, frame (D), return].
inline std::vector<double> probe_feature_vector(const ProbeSummary& p) {
  std::vector<double> v;
  v.reserve(p.mean_policy_probs.size() + p.mean_frame.size() + 2);
  v.insert(v.end(), p.mean_policy_probs.begin(), p.mean_policy_probs.end());
  v.push_back(p.mean_baseline);
  v.insert(v.end(), p.mean_frame.begin(), p.mean_frame.end());
  v.push_back(p.mean_episode_return);
  return v;
}

inline SimilarityVector similarity_gpt35(const ProbeSummary& p1, const ProbeSummary& p2) {
  detail::check_probe_shapes(p1, p2);
  const double c = clamp01(cosine_similarity(probe_feature_vector(p1), probe_feature_vector(p2)));
  return {{c, c, c}, "gpt35"};
}

/// 1 - |b1 - b2| / max(|b1|, |b2|), with 0/0 read as identical.
inline double relative_baseline_similarity(double b1, double b2) {
  const double denom = std::max(std::abs(b1), std::abs(b2));
  if (denom == 0.0) return 1.0;
  return clamp01(1.0 - std::abs(b1 - b2) / denom);
}

inline SimilarityVector similarity_glm4(const ProbeSummary& p1, const ProbeSummary& p2) {
  detail::check_probe_shapes(p1, p2);
  SimilarityVector out;
  out.strategy_id = "glm4";
  out.s[0] = clamp01(cosine_similarity(p1.mean_policy_probs, p2.mean_policy_probs));
  out.s[1] = clamp01(jaccard(p1.action_set, p2.action_set));
  out.s[2] = relative_baseline_similarity(p1.mean_baseline, p2.mean_baseline);
  return out;
}

/// Feature groups: layout (size, dark, random start) -> state; family and hazards -> policy;
/// lava, monster, family -> value.
inline SimilarityVector descriptor_similarity(const TaskDescriptor& d1, const TaskDescriptor& d2) {
  const auto f1 = descriptor_features(d1);
  const auto f2 = descriptor_features(d2);
  auto group = [&](std::initializer_list<std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += std::abs(f1[i] - f2[i]);
    return clamp01(1.0 - s / static_cast<double>(idx.size()));
  };
  SimilarityVector out;
  out.strategy_id = "descriptor";
  out.s[0] = group({0, 1, 5});
  out.s[1] = group({6, 2, 3, 4});
  out.s[2] = group({4, 2, 6});
  return out;
}

inline const std::vector<std::string>& similarity_strategies() {
  static const std::vector<std::string> ids{"gpt4o", "gpt35", "glm4", "descriptor"};
  return ids;
}

inline bool is_similarity_strategy(const std::string& id) {
  const auto& ids = similarity_strategies();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

inline bool needs_probes(const std::string& id) { return id != "descriptor"; }

struct SimilarityInputs {
  const TaskDescriptor* previous = nullptr;
  const TaskDescriptor* current = nullptr;
  const ProbeSummary* probe_previous = nullptr;
  const ProbeSummary* probe_current = nullptr;
};

inline SimilarityVector compute_similarity(const std::string& id, const SimilarityInputs& in) {
  if (id == "descriptor") {
    if (!in.previous || !in.current) throw UsageError("descriptor similarity needs both task descriptors");
    return descriptor_similarity(*in.previous, *in.current);
  }
  if (!is_similarity_strategy(id)) throw ConfigError("unknown similarity strategy '" + id + "'");
  if (!in.probe_previous || !in.probe_current) throw UsageError("similarity strategy '" + id + "' needs probes");
  if (id == "gpt4o") return similarity_gpt4o(*in.probe_previous, *in.probe_current);
  if (id == "gpt35") return similarity_gpt35(*in.probe_previous, *in.probe_current);
  return similarity_glm4(*in.probe_previous, *in.probe_current);
}

}  // namespace sdw
