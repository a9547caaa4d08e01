#pragma once

// Two-head actor-critic MLP: obs (D) -> tanh hidden (H) -> {policy logits (A), baseline (1)}.
// Parameters live in one flat buffer; Eigen maps provide the per-layer views.
// Inputs are binary observations, so the first layer only touches active columns.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sdw/env.hpp"
#include "sdw/errors.hpp"
#include "sdw/losses.hpp"
#include "sdw/rng.hpp"

namespace sdw {

struct NetShape {
  std::size_t obs_dim = 0;
  std::size_t hidden = 128;
  std::size_t actions = kNumActions;

  std::size_t param_count() const { return hidden * obs_dim + hidden + actions * hidden + actions + hidden + 1; }
  bool operator==(const NetShape&) const = default;
};

/// Stable index map of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;
};

class AgentParams {
 public:
  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using CMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using CVecMap = Eigen::Map<const Eigen::VectorXd>;

  AgentParams() = default;
  explicit AgentParams(NetShape shape) : shape_(shape), flat_(shape.param_count(), 0.0) {}

  static AgentParams zeros(NetShape shape) { return AgentParams(shape); }

  /// Glorot-uniform hidden layer, small-scale heads so the initial policy is near uniform.
  static AgentParams initialize(NetShape shape, std::uint64_t seed) {
    AgentParams p(shape);
    Rng rng(mix_seed(seed, stream::kInit));
    auto fill = [&](const ParamBlock& b, double limit) {
      for (std::size_t k = 0; k < b.rows * b.cols; ++k) p.flat_[b.offset + k] = (2.0 * uniform01(rng) - 1.0) * limit;
    };
    const auto blocks = p.layout();
    const double h = static_cast<double>(shape.hidden);
    fill(blocks[0], std::sqrt(6.0 / (static_cast<double>(shape.obs_dim) + h)));
    fill(blocks[2], 0.01 * std::sqrt(6.0 / (h + static_cast<double>(shape.actions))));
    fill(blocks[4], 0.01 * std::sqrt(6.0 / (h + 1.0)));
    return p;
  }

  std::vector<ParamBlock> layout() const {
    const auto& s = shape_;
    std::vector<ParamBlock> b;
    std::size_t off = 0;
    auto add = [&](std::string n, std::size_t r, std::size_t c) {
      b.push_back({std::move(n), off, r, c});
      off += r * c;
    };
    add("hidden.weight", s.hidden, s.obs_dim);
    add("hidden.bias", s.hidden, 1);
    add("policy.weight", s.actions, s.hidden);
    add("policy.bias", s.actions, 1);
    add("baseline.weight", 1, s.hidden);
    add("baseline.bias", 1, 1);
    return b;
  }

  const NetShape& shape() const { return shape_; }
  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }
  std::size_t size() const { return flat_.size(); }

  MatMap w1() { return {flat_.data() + off_w1(), rows_h(), cols_d()}; }
  CMatMap w1() const { return {flat_.data() + off_w1(), rows_h(), cols_d()}; }
  VecMap b1() { return {flat_.data() + off_b1(), rows_h()}; }
  CVecMap b1() const { return {flat_.data() + off_b1(), rows_h()}; }
  MatMap wp() { return {flat_.data() + off_wp(), rows_a(), rows_h()}; }
  CMatMap wp() const { return {flat_.data() + off_wp(), rows_a(), rows_h()}; }
  VecMap bp() { return {flat_.data() + off_bp(), rows_a()}; }
  CVecMap bp() const { return {flat_.data() + off_bp(), rows_a()}; }
  VecMap wv() { return {flat_.data() + off_wv(), rows_h()}; }
  CVecMap wv() const { return {flat_.data() + off_wv(), rows_h()}; }
  double& bv() { return flat_[off_bv()]; }
  double bv() const { return flat_[off_bv()]; }

  bool all_finite() const {
    return std::all_of(flat_.begin(), flat_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const AgentParams&) const = default;

 private:
  Eigen::Index rows_h() const { return static_cast<Eigen::Index>(shape_.hidden); }
  Eigen::Index rows_a() const { return static_cast<Eigen::Index>(shape_.actions); }
  Eigen::Index cols_d() const { return static_cast<Eigen::Index>(shape_.obs_dim); }
  std::size_t off_w1() const { return 0; }
  std::size_t off_b1() const { return shape_.hidden * shape_.obs_dim; }
  std::size_t off_wp() const { return off_b1() + shape_.hidden; }
  std::size_t off_bp() const { return off_wp() + shape_.actions * shape_.hidden; }
  std::size_t off_wv() const { return off_bp() + shape_.actions; }
  std::size_t off_bv() const { return off_wv() + shape_.hidden; }

  NetShape shape_;
  std::vector<double> flat_;
};

struct ForwardOut {
  std::vector<double> policy_logits;
  std::vector<double> policy_probs;
  double baseline = 0.0;
};

/// logits - logsumexp(logits), exponentiated.
inline std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  const double lse = mx + std::log(s);
  std::vector<double> p(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) p[k] = std::exp(logits[k] - lse);
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - lse;
  return out;
}

namespace detail {

inline void check_dim(const AgentParams& params, const Observation& obs) {
  if (obs.dim() != params.shape().obs_dim)
    throw UsageError("observation length " + std::to_string(obs.dim()) + " does not match network input " +
                     std::to_string(params.shape().obs_dim));
}

inline Eigen::VectorXd hidden(const AgentParams& params, const Observation& obs) {
  Eigen::VectorXd pre = params.b1();
  const auto w1 = params.w1();
  for (auto j : obs.active()) pre += w1.col(j);
  return pre.array().tanh().matrix();
}

inline ForwardOut heads(const AgentParams& params, const Eigen::VectorXd& h) {
  ForwardOut out;
  const Eigen::VectorXd z = params.wp() * h + params.bp();
  out.policy_logits.assign(z.data(), z.data() + z.size());
  out.policy_probs = softmax(out.policy_logits);
  out.baseline = params.wv().dot(h) + params.bv();
  return out;
}

}  // namespace detail

/// Pure function of (params, obs).
inline ForwardOut forward(const AgentParams& params, const Observation& obs) {
  detail::check_dim(params, obs);
  return detail::heads(params, detail::hidden(params, obs));
}

/// Inverse-CDF draw; consumes exactly one RNG draw.
inline int sample_action(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw UsageError("sample_action: negative or NaN probability");
    total += p;
  }
  if (probs.empty() || std::abs(total - 1.0) > 1e-6) throw UsageError("sample_action: probabilities do not sum to 1");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  // Rounding at the top end: last action with nonzero mass.
  for (std::size_t k = probs.size(); k-- > 0;)
    if (probs[k] > 0.0) return static_cast<int>(k);
  return static_cast<int>(probs.size() - 1);
}

inline int greedy_action(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

/// Current-policy outputs for every transition (and bootstrap state) of a batch.
inline BatchEval evaluate_batch(const AgentParams& params, const TrainBatch& batch) {
  BatchEval ev(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& traj = batch[i];
    auto& e = ev[i];
    e.probs.reserve(traj.steps.size());
    e.values.reserve(traj.steps.size() + 1);
    for (const auto& tr : traj.steps) {
      auto f = forward(params, tr.observation);
      e.probs.push_back(std::move(f.policy_probs));
      e.values.push_back(f.baseline);
    }
    e.values.push_back(forward(params, traj.bootstrap_observation).baseline);
  }
  return ev;
}

struct LossSpec {
  LossWeights weights;
  VtraceParams vtrace;
  const EwcAnchor* ewc = nullptr;
};

/// Loss with caller-supplied (frozen) targets. The finite-difference reference for gradient().
inline LossTerms loss_with_targets(const AgentParams& params, const TrainBatch& batch, const LossSpec& spec,
                                   const std::vector<VtraceTargets>& targets) {
  const auto ev = evaluate_batch(params, batch);
  LossTerms t = total_loss(batch, ev, targets, spec.weights);
  if (spec.ewc) {
    t.ewc = ewc_penalty(params.flat(), spec.ewc->params, spec.ewc->fisher, spec.ewc->lambda);
    t.total += t.ewc;
  }
  return t;
}

struct GradientResult {
  LossTerms loss;
  std::vector<double> grad;
  std::vector<VtraceTargets> targets;
};

/// Reverse-mode gradient of the total loss w.r.t. the flat parameters.
/// V-trace targets are computed at the current parameters and treated as constants.
inline GradientResult gradient(const AgentParams& params, const TrainBatch& batch, const LossSpec& spec) {
  if (batch.empty() || transition_count(batch) == 0) throw UsageError("gradient: empty batch");
  const auto& shape = params.shape();
  const auto H = static_cast<Eigen::Index>(shape.hidden);
  const auto A = static_cast<Eigen::Index>(shape.actions);
  const auto N = static_cast<Eigen::Index>(transition_count(batch));

  Eigen::MatrixXd hid(H, N);
  BatchEval ev(batch.size());
  {
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto& e = ev[i];
      for (const auto& tr : batch[i].steps) {
        detail::check_dim(params, tr.observation);
        hid.col(col) = detail::hidden(params, tr.observation);
        auto f = detail::heads(params, hid.col(col));
        e.probs.push_back(std::move(f.policy_probs));
        e.values.push_back(f.baseline);
        ++col;
      }
      e.values.push_back(forward(params, batch[i].bootstrap_observation).baseline);
    }
  }

  GradientResult out;
  out.targets = vtrace_targets(batch, ev, spec.vtrace);
  out.loss = total_loss(batch, ev, out.targets, spec.weights);
  const auto og = output_gradients(batch, ev, out.targets, spec.weights);

  Eigen::MatrixXd dz(A, N);
  Eigen::RowVectorXd dv(N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto& d = og.d_logits[static_cast<std::size_t>(k)];
    for (Eigen::Index a = 0; a < A; ++a) dz(a, k) = d[static_cast<std::size_t>(a)];
    dv(k) = og.d_value[static_cast<std::size_t>(k)];
  }

  AgentParams g(shape);
  g.wp() = dz * hid.transpose();
  g.bp() = dz.rowwise().sum();
  g.wv() = hid * dv.transpose();
  g.bv() = dv.sum();
  Eigen::MatrixXd dpre = params.wp().transpose() * dz + params.wv() * dv;
  dpre.array() *= (1.0 - hid.array().square());
  g.b1() = dpre.rowwise().sum();
  {
    auto gw1 = g.w1();
    Eigen::Index col = 0;
    for (const auto& traj : batch)
      for (const auto& tr : traj.steps) {
        for (auto j : tr.observation.active()) gw1.col(j) += dpre.col(col);
        ++col;
      }
  }

  out.grad.assign(g.flat().begin(), g.flat().end());
  if (spec.ewc) {
    out.loss.ewc = ewc_penalty(params.flat(), spec.ewc->params, spec.ewc->fisher, spec.ewc->lambda);
    out.loss.total += out.loss.ewc;
    add_ewc_gradient(params.flat(), *spec.ewc, out.grad);
  }
  if (!std::isfinite(out.loss.total)) throw NumericalError("gradient: non-finite loss");
  return out;
}

/// d log pi(action | obs) / d theta, used for the diagonal Fisher estimate.
inline std::vector<double> log_prob_gradient(const AgentParams& params, const Observation& obs, int action) {
  detail::check_dim(params, obs);
  const Eigen::VectorXd h = detail::hidden(params, obs);
  const auto f = detail::heads(params, h);
  const auto A = static_cast<Eigen::Index>(params.shape().actions);
  Eigen::VectorXd dz(A);
  for (Eigen::Index k = 0; k < A; ++k) dz(k) = (k == action ? 1.0 : 0.0) - f.policy_probs[static_cast<std::size_t>(k)];
  AgentParams g(params.shape());
  g.wp() = dz * h.transpose();
  g.bp() = dz;
  Eigen::VectorXd dpre = params.wp().transpose() * dz;
  dpre.array() *= (1.0 - h.array().square());
  g.b1() = dpre;
  auto gw1 = g.w1();
  for (auto j : obs.active()) gw1.col(j) = dpre;
  return {g.flat().begin(), g.flat().end()};
}

/// Scales grad in place so its L2 norm is at most max_norm; returns the original norm.
inline double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double v : grad) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& v : grad) v *= s;
  }
  return norm;
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  bool operator==(const AdamState&) const = default;
};

inline void optimizer_step(AdamState& state, AgentParams& params, std::span<const double> grad, double lr) {
  const std::size_t n = params.size();
  if (grad.size() != n) throw UsageError("optimizer_step: gradient size does not match parameters");
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto theta = params.flat();
  for (std::size_t k = 0; k < n; ++k) {
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grad[k];
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grad[k] * grad[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    theta[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace sdw
