#pragma once

// Sequential multi-task training. Segments run task order repeated per round;
// at each boundary the similarity between the new task and the previous one is
// mapped to a WeightBundle, which stays fixed for the whole segment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sdw/agent.hpp"
#include "sdw/env.hpp"
#include "sdw/errors.hpp"
#include "sdw/losses.hpp"
#include "sdw/metrics.hpp"
#include "sdw/replay.hpp"
#include "sdw/rng.hpp"
#include "sdw/similarity.hpp"
#include "sdw/weighting.hpp"

namespace sdw {

enum class Method { SdwFull, SdwBufferOnly, SdwLossOnly, ClearFixed, Ewc, Naive };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::SdwFull: return "sdw_full";
    case Method::SdwBufferOnly: return "sdw_buffer_only";
    case Method::SdwLossOnly: return "sdw_loss_only";
    case Method::ClearFixed: return "clear_fixed";
    case Method::Ewc: return "ewc";
    case Method::Naive: return "naive";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (auto m : {Method::SdwFull, Method::SdwBufferOnly, Method::SdwLossOnly, Method::ClearFixed, Method::Ewc,
                 Method::Naive})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + s +
                    "' (expected sdw_full, sdw_buffer_only, sdw_loss_only, clear_fixed, ewc, naive)");
}

inline bool uses_replay(Method m) {
  return m == Method::SdwFull || m == Method::SdwBufferOnly || m == Method::SdwLossOnly || m == Method::ClearFixed;
}

inline bool uses_similarity(Method m) {
  return m == Method::SdwFull || m == Method::SdwBufferOnly || m == Method::SdwLossOnly;
}

struct TrainingConfig {
  std::size_t hidden = 128;
  double learning_rate = 3e-4;
  double grad_clip = 40.0;
  double entropy_cost = 0.01;
  double value_loss_cost = 0.5;
  VtraceParams vtrace{};
  ReplayConfig replay{};
  std::size_t batch_size = 8;  // unrolls per update
  std::size_t unroll_length = kUnrollLength;
  WeightBundle fixed = fixed_bundle();
  bool decouple_buffer_target = false;
  double ewc_lambda = 100.0;
  std::size_t fisher_samples = 2048;
  int probe_steps = kDefaultProbeSteps;
};

struct ExperimentPlan {
  std::vector<TaskDescriptor> tasks;
  int rounds = 1;
  std::int64_t steps_per_segment = 100000;
  std::int64_t eval_every = 10000;
  int eval_episodes = 10;
  Method method = Method::SdwFull;
  std::string strategy_id = "gpt4o";    // weighting rule
  std::string similarity_id = "gpt4o";  // similarity rule
  std::uint64_t seed = 0;
  TrainingConfig training{};

  std::size_t segments() const { return static_cast<std::size_t>(rounds) * tasks.size(); }

  int canvas_size() const {
    int c = kMinGrid;
    for (const auto& t : tasks) c = std::max(c, t.grid_size);
    return c;
  }

  void validate() const {
    if (tasks.empty()) throw ConfigError("plan needs at least one task");
    std::set<std::string> ids;
    for (const auto& t : tasks) {
      t.validate();
      if (!ids.insert(t.task_id).second) throw ConfigError("duplicate task id '" + t.task_id + "'");
    }
    const auto T = static_cast<std::int64_t>(training.unroll_length);
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (T < 1) throw ConfigError("unroll_length must be >= 1");
    if (steps_per_segment <= 0 || steps_per_segment % T != 0)
      throw ConfigError("steps_per_segment must be a positive multiple of the unroll length");
    if (eval_every <= 0 || eval_every % T != 0) throw ConfigError("eval_every must be a positive multiple of the unroll length");
    if (steps_per_segment % eval_every != 0) throw ConfigError("eval_every must divide steps_per_segment");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (training.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (training.probe_steps < 1) throw ConfigError("probe_steps must be >= 1");
    if (!(training.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    training.replay.validate();
    const auto& ws = weighting_strategies();
    if (std::find(ws.begin(), ws.end(), strategy_id) == ws.end())
      throw ConfigError("unknown weighting strategy '" + strategy_id + "'");
    if (!is_similarity_strategy(similarity_id)) throw ConfigError("unknown similarity strategy '" + similarity_id + "'");
    const auto& f = training.fixed;
    if (!(f.w_buffer >= 0 && f.w_buffer <= 1 && f.batch_replay_ratio >= 0 && f.batch_replay_ratio <= 1))
      throw ConfigError("fixed w_buffer / replay ratio must be in [0, 1]");
  }
};

struct EvalRecord {
  std::int64_t global_step = 0;
  int segment = 0;  // 1-based segment being trained; 0 = before training
  std::string train_task;
  std::string eval_task;
  double mean_return = 0.0;
  int n_episodes = 0;
  bool operator==(const EvalRecord&) const = default;
};

struct WeightLogEntry {
  int segment = 0;  // 1-based
  std::string train_task;
  std::string previous_task;
  std::optional<SimilarityVector> similarity;
  WeightBundle computed;
  WeightBundle applied;
};

struct BufferStatsRow {
  std::int64_t step = 0;
  std::size_t size = 0;
  double p_old = 0.0;
  double p_insert = 0.0;
  double w_buffer = 0.0;
};

struct RunArtifacts {
  EvalMatrix eval_matrix;
  std::vector<WeightLogEntry> weight_log;
  std::vector<BufferStatsRow> buffer_stats;
  std::vector<AgentParams> checkpoints;  // params after each segment
  std::vector<EvalRecord> reward_curves;
  std::int64_t total_env_steps = 0;
  std::int64_t eval_env_steps = 0;
  std::int64_t updates = 0;
};

/// Greedy evaluation: mean undiscounted return over `episodes` fresh episodes per env.
inline std::vector<double> evaluate_all(const AgentParams& params, std::vector<GridEnv>& envs, int episodes,
                                        std::uint64_t seed, std::int64_t* env_steps = nullptr) {
  std::vector<double> row;
  row.reserve(envs.size());
  for (std::size_t t = 0; t < envs.size(); ++t) {
    auto& env = envs[t];
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
      Observation obs = env.reset(mix_seed(seed, t, static_cast<std::uint64_t>(e)));
      for (;;) {
        const auto f = forward(params, obs);
        auto res = env.step(greedy_action(f.policy_probs));
        total += res.reward;
        if (env_steps) ++*env_steps;
        if (res.done) break;
        obs = std::move(res.observation);
      }
    }
    row.push_back(total / episodes);
  }
  return row;
}

/// Diagonal Fisher: mean squared gradient of log pi(a|s) over on-policy samples.
inline std::vector<double> estimate_fisher(const AgentParams& params, GridEnv& env, std::size_t samples,
                                           std::uint64_t seed) {
  std::vector<double> fisher(params.size(), 0.0);
  if (samples == 0) return fisher;
  Rng rng(mix_seed(seed, stream::kFisher));
  std::uint64_t episode = 0;
  Observation obs = env.reset(mix_seed(seed, stream::kFisher, episode++));
  for (std::size_t k = 0; k < samples; ++k) {
    const auto f = forward(params, obs);
    const int a = sample_action(f.policy_probs, rng);
    const auto g = log_prob_gradient(params, obs, a);
    for (std::size_t i = 0; i < g.size(); ++i) fisher[i] += g[i] * g[i];
    auto res = env.step(a);
    obs = res.done ? env.reset(mix_seed(seed, stream::kFisher, episode++)) : std::move(res.observation);
  }
  for (double& v : fisher) v /= static_cast<double>(samples);
  return fisher;
}

class Trainer {
 public:
  using Progress = std::function<void(const std::string&)>;

  explicit Trainer(ExperimentPlan plan, Progress progress = {})
      : plan_(std::move(plan)), progress_(std::move(progress)), buffer_(plan_.training.replay) {
    plan_.validate();
    canvas_ = plan_.canvas_size();
    shape_ = NetShape{static_cast<std::size_t>(kNumChannels * canvas_ * canvas_), plan_.training.hidden, kNumActions};
    params_ = AgentParams::initialize(shape_, plan_.seed);
    for (std::size_t t = 0; t < plan_.tasks.size(); ++t) eval_envs_.push_back(make_task_env(t));
  }

  const ExperimentPlan& plan() const { return plan_; }
  const AgentParams& params() const { return params_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  std::uint64_t layout_seed(std::size_t task) const { return mix_seed(plan_.seed, stream::kLayout, task); }
  std::uint64_t eval_seed() const { return mix_seed(plan_.seed, stream::kEvalEpisode); }

  GridEnv make_task_env(std::size_t task) const { return GridEnv(plan_.tasks[task], layout_seed(task), canvas_); }

  RunArtifacts run() {
    RunArtifacts art;
    const std::size_t n_tasks = plan_.tasks.size();
    const std::size_t n_seg = plan_.segments();
    art.eval_matrix.r.assign(n_tasks, std::vector<double>(n_seg + 1, 0.0));
    art.eval_matrix.segment_task.resize(n_seg);
    std::vector<double> best(n_tasks, -std::numeric_limits<double>::infinity());

    auto record_eval = [&](std::int64_t global_step, int segment, const std::string& train_task) {
      const auto row = evaluate_all(params_, eval_envs_, plan_.eval_episodes, eval_seed(), &art.eval_env_steps);
      for (std::size_t t = 0; t < n_tasks; ++t) {
        art.reward_curves.push_back(
            {global_step, segment, train_task, plan_.tasks[t].task_id, row[t], plan_.eval_episodes});
        best[t] = std::max(best[t], row[t]);
      }
      return row;
    };

    const auto row0 = record_eval(0, 0, "none");
    for (std::size_t t = 0; t < n_tasks; ++t) art.eval_matrix.r[t][0] = row0[t];

    std::optional<EwcAnchor> ewc;
    for (std::size_t k = 0; k < n_seg; ++k) {
      const std::size_t task = k % n_tasks;
      art.eval_matrix.segment_task[k] = static_cast<int>(task);
      const WeightLogEntry entry = boundary(k);
      art.weight_log.push_back(entry);
      if (progress_) {
        std::string msg = "segment " + std::to_string(k + 1) + "/" + std::to_string(n_seg) + " task " +
                          plan_.tasks[task].task_id + " ratio=" + std::to_string(entry.applied.batch_replay_ratio) +
                          " costs=(" + std::to_string(entry.applied.policy_cloning_cost) + "," +
                          std::to_string(entry.applied.value_cloning_cost) + ")";
        progress_(msg);
      }

      const auto row = train_segment(k, entry.applied, ewc ? &*ewc : nullptr, art, record_eval);
      for (std::size_t t = 0; t < n_tasks; ++t) art.eval_matrix.r[t][k + 1] = row[t];
      art.checkpoints.push_back(params_);

      if (plan_.method == Method::Ewc) {
        GridEnv env = make_task_env(task);
        EwcAnchor a;
        a.params.assign(params_.flat().begin(), params_.flat().end());
        a.fisher = estimate_fisher(params_, env, plan_.training.fisher_samples, mix_seed(plan_.seed, k));
        a.lambda = plan_.training.ewc_lambda;
        ewc = std::move(a);
      }
    }
    art.eval_matrix.all_max = best;
    return art;
  }

  /// Bundle for 0-based segment k; computed once, before the segment starts.
  WeightLogEntry boundary(std::size_t k) {
    const std::size_t n_tasks = plan_.tasks.size();
    const std::size_t task = k % n_tasks;
    const auto& fixed = plan_.training.fixed;
    WeightLogEntry e;
    e.segment = static_cast<int>(k + 1);
    e.train_task = plan_.tasks[task].task_id;
    e.computed = fixed;
    if (k > 0) {
      const std::size_t prev = (k - 1) % n_tasks;
      e.previous_task = plan_.tasks[prev].task_id;
      if (uses_similarity(plan_.method)) {
        const auto s = similarity_between(prev, task, k);
        e.similarity = s;
        e.computed = compute_weights(plan_.strategy_id, s, {plan_.training.decouple_buffer_target});
      }
    }
    WeightBundle a = fixed;
    switch (plan_.method) {
      case Method::SdwFull: a = e.computed; break;
      case Method::SdwBufferOnly:
        a.w_buffer = e.computed.w_buffer;
        a.batch_replay_ratio = e.computed.batch_replay_ratio;
        break;
      case Method::SdwLossOnly:
        a.policy_cloning_cost = e.computed.policy_cloning_cost;
        a.value_cloning_cost = e.computed.value_cloning_cost;
        break;
      case Method::ClearFixed: break;
      case Method::Ewc:
      case Method::Naive:
        a.batch_replay_ratio = 0.0;
        a.policy_cloning_cost = 0.0;
        a.value_cloning_cost = 0.0;
        break;
    }
    a.strategy_id = plan_.method == Method::SdwFull ? e.computed.strategy_id : to_string(plan_.method);
    e.applied = a;
    return e;
  }

  /// S between the previous segment's task and the new one, probed with the current
  /// (end-of-previous-segment) agent.
  SimilarityVector similarity_between(std::size_t prev, std::size_t task, std::size_t k) const {
    SimilarityInputs in;
    in.previous = &plan_.tasks[prev];
    in.current = &plan_.tasks[task];
    std::optional<ProbeSummary> pp, pc;
    if (needs_probes(plan_.similarity_id)) {
      GridEnv env_prev = make_task_env(prev);
      GridEnv env_cur = make_task_env(task);
      pp = collect_probe(env_prev, params_, plan_.training.probe_steps, mix_seed(plan_.seed, stream::kProbe, k, 0));
      pc = collect_probe(env_cur, params_, plan_.training.probe_steps, mix_seed(plan_.seed, stream::kProbe, k, 1));
      in.probe_previous = &*pp;
      in.probe_current = &*pc;
    }
    return compute_similarity(plan_.similarity_id, in);
  }

 private:
  template <typename RecordEval>
  std::vector<double> train_segment(std::size_t k, const WeightBundle& w, const EwcAnchor* ewc, RunArtifacts& art,
                                    RecordEval& record_eval) {
    const auto& tc = plan_.training;
    const std::size_t task = k % plan_.tasks.size();
    const bool replay = uses_replay(plan_.method);
    const auto T = static_cast<std::int64_t>(tc.unroll_length);
    const std::int64_t base_step = static_cast<std::int64_t>(k) * plan_.steps_per_segment;
    const std::string& task_id = plan_.tasks[task].task_id;

    buffer_.rollover(static_cast<int>(k));
    buffer_.set_target(std::clamp(w.w_buffer, 0.0, 1.0));

    LossSpec spec;
    spec.weights = {w.policy_cloning_cost, w.value_cloning_cost, tc.entropy_cost, tc.value_loss_cost};
    spec.vtrace = tc.vtrace;
    spec.ewc = ewc;

    GridEnv env = make_task_env(task);
    Rng actor_rng(mix_seed(plan_.seed, stream::kActor, k));
    Rng replay_rng(mix_seed(plan_.seed, stream::kReplay, k));
    std::uint64_t episode = 0;
    auto next_episode_seed = [&] { return mix_seed(plan_.seed, stream::kTrainEpisode, k, episode++); };
    Observation obs = env.reset(next_episode_seed());

    std::vector<Trajectory> pending;
    std::vector<double> last_row;
    for (std::int64_t steps = 0; steps < plan_.steps_per_segment;) {
      Trajectory traj;
      traj.task_id = task_id;
      traj.generation = static_cast<int>(k);
      traj.steps.reserve(tc.unroll_length);
      for (std::int64_t t = 0; t < T; ++t) {
        auto f = forward(params_, obs);
        const int a = sample_action(f.policy_probs, actor_rng);
        auto res = env.step(a);
        traj.steps.push_back({std::move(obs), a, res.reward, res.done, std::move(f.policy_probs), f.baseline});
        obs = res.done ? env.reset(next_episode_seed()) : std::move(res.observation);
      }
      traj.bootstrap_observation = obs;
      steps += T;
      art.total_env_steps += T;

      if (replay) buffer_.offer({traj, base_step + steps}, replay_rng);
      pending.push_back(std::move(traj));

      const double ratio = (replay && !buffer_.empty()) ? w.batch_replay_ratio : 0.0;
      const auto n_replay = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(tc.batch_size)));
      const std::size_t need = std::max<std::size_t>(1, tc.batch_size - n_replay);
      if (pending.size() >= need) {
        const TrainBatch batch = sample_batch(buffer_, pending, tc.batch_size, ratio, replay_rng);
        update(batch, spec, k);
        ++art.updates;
        pending.clear();
      }

      if (steps % plan_.eval_every == 0) {
        last_row = record_eval(base_step + steps, static_cast<int>(k + 1), task_id);
        if (replay)
          art.buffer_stats.push_back(
              {base_step + steps, buffer_.size(), buffer_.p_old(), buffer_.p_insert(), buffer_.w_buffer()});
      }
    }
    return last_row;
  }

  void update(const TrainBatch& batch, const LossSpec& spec, std::size_t k) {
    GradientResult g;
    try {
      g = gradient(params_, batch, spec);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " [segment " + std::to_string(k + 1) + ", update " +
                           std::to_string(adam_.step + 1) + "]");
    }
    clip_global_norm(g.grad, plan_.training.grad_clip);
    optimizer_step(adam_, params_, g.grad, plan_.training.learning_rate);
    if (!params_.all_finite())
      throw NumericalError("parameters became non-finite at segment " + std::to_string(k + 1) +
                           " (loss=" + std::to_string(g.loss.total) + ")");
  }

  ExperimentPlan plan_;
  Progress progress_;
  int canvas_ = kMinGrid;
  NetShape shape_;
  AgentParams params_;
  AdamState adam_;
  ReplayBuffer buffer_;
  std::vector<GridEnv> eval_envs_;
};

inline RunArtifacts run(const ExperimentPlan& plan, Trainer::Progress progress = {}) {
  Trainer trainer(plan, std::move(progress));
  return trainer.run();
}

}  // namespace sdw
