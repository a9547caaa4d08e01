#pragma once

// Similarity -> training controls. Each strategy pairs a cloning-cost rule
// (policy, value) with a batch replay-ratio rule. The buffer target w_buffer
// is the replay ratio unless decoupled.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sdw/errors.hpp"
#include "sdw/similarity.hpp"

namespace sdw {

struct CloningCosts {
  double policy = 0.0;
  double value = 0.0;
  bool operator==(const CloningCosts&) const = default;
};

struct WeightBundle {
  double w_buffer = 0.75;
  double batch_replay_ratio = 0.75;
  double policy_cloning_cost = 0.01;
  double value_cloning_cost = 0.005;
  std::string strategy_id = "fixed";

  bool operator==(const WeightBundle&) const = default;
};

inline constexpr double kMaxPolicyCloningCost = 0.01;
inline constexpr double kMaxValueCloningCost = 0.005;
inline constexpr double kFixedReplayRatio = 0.75;

inline WeightBundle fixed_bundle() { return {}; }

namespace detail {
inline void check_similarity(std::span<const double> s) {
  if (s.size() != 3) throw UsageError("similarity vector must have 3 components, got " + std::to_string(s.size()));
}
inline double mean3(std::span<const double> s) { return (s[0] + s[1] + s[2]) / 3.0; }
}  // namespace detail

// GPT-4o rules. value_sim is S[2]; a negative value cost is floored at 0.
inline CloningCosts cloning_costs_gpt4o(std::span<const double> s) {
  detail::check_similarity(s);
  const double state = s[0], policy = s[1], value = s[2];
  return {std::max(0.0, kMaxPolicyCloningCost * (0.8 * policy + 0.2 * state)),
          std::max(0.0, kMaxValueCloningCost * (1.0 - (0.9 * value + 0.1 * state)))};
}

inline double replay_ratio_gpt4o(std::span<const double> s, double base_ratio = 0.8, double smooth_factor = 2.0) {
  detail::check_similarity(s);
  const double sim = 0.4 * s[0] + 0.4 * s[1] + 0.2 * s[2];
  return base_ratio + (1.0 - base_ratio) * (1.0 - std::pow(sim, smooth_factor));
}

// GPT-3.5 rules operate on one scalar similarity; costs come back as (policy, value).
inline CloningCosts cloning_costs_gpt35(double similarity) {
  if (similarity > 0.8) return {0.0, 0.0};
  if (similarity > 0.6) return {0.01, 0.0};
  if (similarity > 0.4) return {0.0, 0.01};
  return {0.01, 0.01};
}

inline double replay_ratio_gpt35(std::span<const double> s) {
  const double sim = detail::mean3(s);
  constexpr double initial = 0.5, max_ratio = 1.0;
  if (sim >= 0.8) return max_ratio;
  return initial + (max_ratio - initial) * sim;
}

// GLM4-9B rules.
inline CloningCosts cloning_costs_glm4(std::span<const double> s) {
  detail::check_similarity(s);
  double w = 0.0;
  for (double v : s) w += 1.0 / (1.0 + std::exp(-v));
  w /= 3.0;
  return {kMaxPolicyCloningCost * w, kMaxValueCloningCost * w};
}

/// 0.5 + 0.5 * ln(sim) / ln(2), sim clipped into [1e-6, 1], result clipped into [0.5, 1].
inline double replay_ratio_glm4(double similarity) {
  constexpr double initial = 0.5, max_ratio = 1.0, eps = 1e-6;
  const double sim = std::clamp(std::isnan(similarity) ? eps : similarity, eps, 1.0);
  const double raw = initial + (max_ratio - initial) * std::log(sim) / std::log(1.0 / (1.0 - initial));
  return std::clamp(raw, initial, max_ratio);
}

inline const std::vector<std::string>& weighting_strategies() {
  static const std::vector<std::string> ids{"gpt4o", "gpt35", "glm4", "fixed"};
  return ids;
}

struct WeightingOptions {
  // When set, w_buffer follows the mean similarity instead of mirroring the replay ratio.
  bool decouple_buffer_target = false;
};

inline WeightBundle compute_weights(const std::string& strategy_id, std::span<const double> s,
                                    const WeightingOptions& opts = {}) {
  detail::check_similarity(s);
  std::array<double, 3> sc{clamp01(s[0]), clamp01(s[1]), clamp01(s[2])};
  WeightBundle b;
  b.strategy_id = strategy_id;
  CloningCosts costs;
  if (strategy_id == "gpt4o") {
    costs = cloning_costs_gpt4o(sc);
    b.batch_replay_ratio = replay_ratio_gpt4o(sc);
  } else if (strategy_id == "gpt35") {
    costs = cloning_costs_gpt35(detail::mean3(sc));
    b.batch_replay_ratio = replay_ratio_gpt35(sc);
  } else if (strategy_id == "glm4") {
    costs = cloning_costs_glm4(sc);
    b.batch_replay_ratio = replay_ratio_glm4(detail::mean3(sc));
  } else if (strategy_id == "fixed") {
    return fixed_bundle();
  } else {
    throw ConfigError("unknown weighting strategy '" + strategy_id + "'");
  }
  b.batch_replay_ratio = clamp01(b.batch_replay_ratio);
  b.w_buffer = opts.decouple_buffer_target ? clamp01(detail::mean3(sc)) : b.batch_replay_ratio;
  b.policy_cloning_cost = std::max(0.0, costs.policy);
  b.value_cloning_cost = std::max(0.0, costs.value);
  return b;
}

inline WeightBundle compute_weights(const std::string& strategy_id, const SimilarityVector& s,
                                    const WeightingOptions& opts = {}) {
  return compute_weights(strategy_id, std::span<const double>(s.s), opts);
}

}  // namespace sdw
