#pragma once

// Loss terms for actor-critic training with replay:
//   total = pg + value_loss_cost * value + entropy_cost * (-entropy)
//         + policy_cloning_cost * KL(behavior || current) + value_cloning_cost * (V - V_behavior)^2
// plus the EWC quadratic anchor penalty used by the EWC baseline.
//
// Everything here operates on already-computed current-policy outputs; the
// network backward pass lives in agent.hpp.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sdw/env.hpp"
#include "sdw/errors.hpp"

namespace sdw {

struct Transition {
  Observation observation;
  int action = 0;
  double reward = 0.0;
  bool done = false;
  std::vector<double> behavior_probs;  // policy at collection time
  double behavior_value = 0.0;
};

/// A fixed-length unroll. Episodes may end inside it; `done` cuts bootstrapping.
struct Trajectory {
  std::vector<Transition> steps;
  Observation bootstrap_observation;  // state after the last step
  std::string task_id;
  int generation = 0;  // training segment the unroll was collected in
  bool is_replay = false;
};

using TrainBatch = std::vector<Trajectory>;

inline std::size_t transition_count(const TrainBatch& batch) {
  std::size_t n = 0;
  for (const auto& t : batch) n += t.steps.size();
  return n;
}

struct LossWeights {
  double policy_cloning_cost = 0.01;
  double value_cloning_cost = 0.005;
  double entropy_cost = 0.01;
  double value_loss_cost = 0.5;

  LossWeights clamped() const {
    auto c = [](double v) { return std::isfinite(v) && v > 0.0 ? v : 0.0; };
    return {c(policy_cloning_cost), c(value_cloning_cost), c(entropy_cost), c(value_loss_cost)};
  }
};

/// Current-policy outputs for one trajectory: probs per step, values per step plus bootstrap.
struct TrajectoryEval {
  std::vector<std::vector<double>> probs;
  std::vector<double> values;  // size steps + 1; back() is V(bootstrap_observation)
};

using BatchEval = std::vector<TrajectoryEval>;

struct VtraceTargets {
  std::vector<double> value_targets;
  std::vector<double> advantages;
};

struct VtraceParams {
  double gamma = 0.99;
  double rho_bar = 1.0;
  double c_bar = 1.0;
};

/// Truncated importance-weighted value targets and policy-gradient advantages.
///   delta_t = rho_t (r_t + g_t V(s_{t+1}) - V(s_t)),  g_t = gamma * (1 - done_t)
///   v_s - V(s_s) = delta_s + g_s c_s (v_{s+1} - V(s_{s+1}))
///   adv_s = rho_s (r_s + g_s v_{s+1} - V(s_s))
inline VtraceTargets vtrace_targets(const Trajectory& traj, const TrajectoryEval& current, const VtraceParams& p) {
  const std::size_t n = traj.steps.size();
  if (current.probs.size() != n || current.values.size() != n + 1)
    throw UsageError("vtrace_targets: evaluation shape does not match trajectory");
  if (!(p.gamma > 0.0 && p.gamma <= 1.0)) throw UsageError("vtrace_targets: gamma must be in (0, 1]");

  std::vector<double> rho(n), c(n), disc(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& tr = traj.steps[t];
    const double mu = tr.behavior_probs.at(static_cast<std::size_t>(tr.action));
    const double pi = current.probs[t].at(static_cast<std::size_t>(tr.action));
    if (!(mu > 0.0))
      throw NumericalError("vtrace_targets: behavior probability of taken action is zero (step " +
                           std::to_string(t) + ", task " + traj.task_id + ")");
    const double ratio = pi / mu;
    rho[t] = std::min(p.rho_bar, ratio);
    c[t] = std::min(p.c_bar, ratio);
    disc[t] = tr.done ? 0.0 : p.gamma;
  }

  VtraceTargets out;
  out.value_targets.assign(n, 0.0);
  out.advantages.assign(n, 0.0);
  const auto& V = current.values;
  double acc = 0.0;  // v_{t+1} - V(s_{t+1})
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rho[k] * (traj.steps[k].reward + disc[k] * V[k + 1] - V[k]);
    acc = delta + disc[k] * c[k] * acc;
    out.value_targets[k] = V[k] + acc;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double next = (k + 1 < n) ? out.value_targets[k + 1] : V[n];
    out.advantages[k] = rho[k] * (traj.steps[k].reward + disc[k] * next - V[k]);
  }
  return out;
}

inline std::vector<VtraceTargets> vtrace_targets(const TrainBatch& batch, const BatchEval& current,
                                                 const VtraceParams& p) {
  if (batch.size() != current.size()) throw UsageError("vtrace_targets: batch/evaluation size mismatch");
  std::vector<VtraceTargets> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(vtrace_targets(batch[i], current[i], p));
  return out;
}

/// KL(p || q) = sum p log(p / q), with 0 log 0 = 0.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) kl += p[k] * (std::log(p[k]) - std::log(q[k]));
  return kl;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

/// -mean_t log pi(a_t | s_t) * adv_t over every transition in the batch.
inline double policy_gradient_loss(const TrainBatch& batch, const BatchEval& current,
                                   const std::vector<VtraceTargets>& targets) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t, ++n) {
      const double pa = current[i].probs[t][static_cast<std::size_t>(batch[i].steps[t].action)];
      sum += -std::log(pa) * targets[i].advantages[t];
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// 0.5 * mean (V(s_t) - v_t)^2.
inline double value_loss(const TrainBatch& batch, const BatchEval& current, const std::vector<VtraceTargets>& targets) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t, ++n) {
      const double d = current[i].values[t] - targets[i].value_targets[t];
      sum += 0.5 * d * d;
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline double mean_entropy(const TrainBatch& batch, const BatchEval& current) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t, ++n) sum += entropy(current[i].probs[t]);
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Mean KL(behavior || current) over replayed transitions; 0 when nothing was replayed.
inline double policy_cloning_loss(const TrainBatch& batch, const BatchEval& current) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i].is_replay) continue;
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t, ++n)
      sum += kl_divergence(batch[i].steps[t].behavior_probs, current[i].probs[t]);
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Mean (V_current - V_behavior)^2 over replayed transitions; 0 when nothing was replayed.
inline double value_cloning_loss(const TrainBatch& batch, const BatchEval& current) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i].is_replay) continue;
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t, ++n) {
      const double d = current[i].values[t] - batch[i].steps[t].behavior_value;
      sum += d * d;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

struct LossTerms {
  double policy_gradient = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double policy_cloning = 0.0;
  double value_cloning = 0.0;
  double ewc = 0.0;
  double total = 0.0;
};

inline LossTerms combine(const LossTerms& raw, const LossWeights& w) {
  LossTerms t = raw;
  t.total = raw.policy_gradient + w.value_loss_cost * raw.value - w.entropy_cost * raw.entropy +
            w.policy_cloning_cost * raw.policy_cloning + w.value_cloning_cost * raw.value_cloning + raw.ewc;
  return t;
}

/// All terms with targets supplied (held constant, as during differentiation).
inline LossTerms total_loss(const TrainBatch& batch, const BatchEval& current, const std::vector<VtraceTargets>& targets,
                            const LossWeights& weights) {
  LossTerms raw;
  raw.policy_gradient = policy_gradient_loss(batch, current, targets);
  raw.value = value_loss(batch, current, targets);
  raw.entropy = mean_entropy(batch, current);
  raw.policy_cloning = policy_cloning_loss(batch, current);
  raw.value_cloning = value_cloning_loss(batch, current);
  LossTerms t = combine(raw, weights.clamped());
  if (!std::isfinite(t.total))
    throw NumericalError("total_loss is not finite (pg=" + std::to_string(raw.policy_gradient) +
                         ", value=" + std::to_string(raw.value) + ", entropy=" + std::to_string(raw.entropy) +
                         ", batch=" + std::to_string(batch.size()) + " unrolls)");
  return t;
}

inline LossTerms total_loss(const TrainBatch& batch, const BatchEval& current, const LossWeights& weights,
                            const VtraceParams& vtrace) {
  return total_loss(batch, current, vtrace_targets(batch, current, vtrace), weights);
}

/// d total / d logits and d total / d value for every transition, batch order.
struct OutputGradients {
  std::vector<std::vector<double>> d_logits;
  std::vector<double> d_value;
  std::vector<double> d_bootstrap;  // per trajectory; always zero (targets are constants)
};

inline OutputGradients output_gradients(const TrainBatch& batch, const BatchEval& current,
                                        const std::vector<VtraceTargets>& targets, const LossWeights& weights) {
  const LossWeights w = weights.clamped();
  const std::size_t n = transition_count(batch);
  std::size_t n_replay = 0;
  for (const auto& tr : batch)
    if (tr.is_replay) n_replay += tr.steps.size();
  const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
  const double inv_r = n_replay ? 1.0 / static_cast<double>(n_replay) : 0.0;

  OutputGradients g;
  g.d_logits.reserve(n);
  g.d_value.reserve(n);
  g.d_bootstrap.assign(batch.size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& traj = batch[i];
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& p = current[i].probs[t];
      const auto a = static_cast<std::size_t>(traj.steps[t].action);
      const double adv = targets[i].advantages[t];
      double plogp = 0.0;
      for (double v : p) plogp += v * std::log(v);
      std::vector<double> dz(p.size());
      for (std::size_t k = 0; k < p.size(); ++k) {
        // -log p_a * adv
        double d = -adv * ((k == a ? 1.0 : 0.0) - p[k]) * inv_n;
        // -entropy = sum p log p
        d += w.entropy_cost * p[k] * (std::log(p[k]) - plogp) * inv_n;
        if (traj.is_replay) d += w.policy_cloning_cost * (p[k] - traj.steps[t].behavior_probs[k]) * inv_r;
        dz[k] = d;
      }
      double dv = w.value_loss_cost * (current[i].values[t] - targets[i].value_targets[t]) * inv_n;
      if (traj.is_replay)
        dv += w.value_cloning_cost * 2.0 * (current[i].values[t] - traj.steps[t].behavior_value) * inv_r;
      g.d_logits.push_back(std::move(dz));
      g.d_value.push_back(dv);
    }
  }
  return g;
}

/// Anchor for the EWC penalty (lambda / 2) * sum F_k (theta_k - theta*_k)^2.
struct EwcAnchor {
  std::vector<double> params;
  std::vector<double> fisher;
  double lambda = 0.0;
};

inline double ewc_penalty(std::span<const double> params, std::span<const double> anchor,
                          std::span<const double> fisher, double lambda) {
  if (params.size() != anchor.size() || params.size() != fisher.size())
    throw UsageError("ewc_penalty: parameter/anchor/fisher size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double d = params[k] - anchor[k];
    s += fisher[k] * d * d;
  }
  return 0.5 * lambda * s;
}

/// Adds d/dtheta of the EWC penalty into grad.
inline void add_ewc_gradient(std::span<const double> params, const EwcAnchor& ewc, std::span<double> grad) {
  for (std::size_t k = 0; k < params.size(); ++k) grad[k] += ewc.lambda * ewc.fisher[k] * (params[k] - ewc.params[k]);
}

}  // namespace sdw
