// Acceptance runner: one PASS/FAIL line per criterion.
//   sdw_acceptance [--only N]... [--config-dir DIR] [--out DIR]

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "../oracles.hpp"
#include "sdw/sdw.hpp"

using namespace sdw;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_config_dir = SDW_CONFIG_DIR;
fs::path g_out;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path out_dir(const std::string& name) {
  auto p = g_out / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. P/F/T equal a brute-force transcription; worked example.
Outcome metrics_oracle() {
  std::mt19937_64 rng(20240601);
  int mismatches = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t tasks = 1 + rng() % 8;
    const std::size_t segs = std::min<std::size_t>(16, tasks * (1 + rng() % std::max<std::size_t>(1, 16 / tasks)));
    const auto m = oracle::random_matrix(rng, tasks, segs, k % 2 == 0);
    const auto e = oracle::brute_force_metrics(m);
    const auto r = metrics_report(m);
    mismatches += !(r.P == e.P && r.F == e.F && r.T == e.T);
  }
  const auto w = metrics_report(EvalMatrix::sequential({{0.0, 1.0, 0.8, 0.6}, {0.0, 0.0, 1.0, 0.9}, {0.0, 0.2, 0.3, 1.0}}));
  const bool worked = std::abs(w.P - 41.0 / 45.0) < 1e-12 && std::abs(w.F - 0.175) < 1e-12 && std::abs(w.T - 0.1) < 1e-12;
  return {mismatches == 0 && worked,
          fmt("%d/200 oracle mismatches; worked example P=%.6f F=%.6f T=%.6f", mismatches, w.P, w.F, w.T)};
}

ProbeSummary hand_probe(std::vector<double> frame, std::vector<double> probs, double baseline, std::set<int> actions = {}) {
  ProbeSummary p;
  p.task_id = "hand";
  p.mean_frame = std::move(frame);
  p.mean_policy_probs = std::move(probs);
  p.mean_baseline = baseline;
  p.action_set = std::move(actions);
  return p;
}

// 2. Similarity and weighting ports reproduce the tabulated values.
Outcome strategy_fidelity() {
  using A = std::array<double, 3>;
  constexpr double tol = 1e-12;
  struct Row {
    std::string what;
    double got, want;
  };
  std::vector<Row> rows;
  auto add = [&](std::string what, double got, double want) { rows.push_back({std::move(what), got, want}); };

  // Similarity ports.
  const auto js = hand_probe({1, 0}, {0.5, 0.5}, 0.0), jt = hand_probe({0.5, 0.5}, {0.5, 0.5}, 0.0);
  add("gpt4o state [1,0] vs [.5,.5]", similarity_gpt4o(js, jt).state(), 1.0 - oracle::js_distance({1, 0}, {0.5, 0.5}));
  const auto far_a = hand_probe({1, 0}, {1, 0}, 0.0), far_b = hand_probe({0, 1}, {0, 1}, 1.0);
  for (double v : similarity_gpt4o(far_a, far_b).s) add("gpt4o disjoint", v, 0.0);
  const double r = 1.0 / std::sqrt(2.0);
  const auto c1 = hand_probe({0, 0}, {1, 0}, 0.0), c2 = hand_probe({0, 0}, {r, r}, 0.0);
  add("gpt35 cosine", similarity_gpt35(c1, c2).state(), r);
  const auto g1 = hand_probe({1, 0}, {0.5, 0.5}, 2.0, {0, 1}), g2 = hand_probe({1, 0}, {0.5, 0.5}, 1.0, {1, 2});
  add("glm4 jaccard", similarity_glm4(g1, g2).s[1], 1.0 / 3.0);
  add("glm4 baseline", similarity_glm4(g1, g2).s[2], 0.5);
  add("glm4 identity", similarity_glm4(g1, g1).mean(), 1.0);

  // Cloning-cost ports.
  const auto k1 = cloning_costs_gpt4o(A{1, 1, 1}), k0 = cloning_costs_gpt4o(A{0, 0, 0}),
             kh = cloning_costs_gpt4o(A{0.5, 0.5, 0.5});
  add("gpt4o costs [1,1,1] policy", k1.policy, 0.01);
  add("gpt4o costs [1,1,1] value", k1.value, 0.0);
  add("gpt4o costs [0,0,0] policy", k0.policy, 0.0);
  add("gpt4o costs [0,0,0] value", k0.value, 0.005);
  add("gpt4o costs [.5] policy", kh.policy, 0.005);
  add("gpt4o costs [.5] value", kh.value, 0.0025);
  add("gpt35 costs 0.9 policy", cloning_costs_gpt35(0.9).policy, 0.0);
  add("gpt35 costs 0.9 value", cloning_costs_gpt35(0.9).value, 0.0);
  add("gpt35 costs 0.7 policy", cloning_costs_gpt35(0.7).policy, 0.01);
  add("gpt35 costs 0.7 value", cloning_costs_gpt35(0.7).value, 0.0);
  add("gpt35 costs 0.1 policy", cloning_costs_gpt35(0.1).policy, 0.01);
  add("gpt35 costs 0.1 value", cloning_costs_gpt35(0.1).value, 0.01);
  const double sig1 = 1.0 / (1.0 + std::exp(-1.0));
  add("glm4 costs [0,0,0] policy", cloning_costs_glm4(A{0, 0, 0}).policy, 0.005);
  add("glm4 costs [0,0,0] value", cloning_costs_glm4(A{0, 0, 0}).value, 0.0025);
  add("glm4 costs [1,1,1] policy", cloning_costs_glm4(A{1, 1, 1}).policy, 0.01 * sig1);
  add("glm4 costs [1,1,1] value", cloning_costs_glm4(A{1, 1, 1}).value, 0.005 * sig1);

  // Replay-ratio ports.
  add("gpt4o ratio [1,1,1]", replay_ratio_gpt4o(A{1, 1, 1}), 0.8);
  add("gpt4o ratio [0,0,0]", replay_ratio_gpt4o(A{0, 0, 0}), 1.0);
  add("gpt4o ratio [.5,.5,.5]", replay_ratio_gpt4o(A{0.5, 0.5, 0.5}), 0.95);
  add("gpt35 ratio mean 0.9", replay_ratio_gpt35(A{0.9, 0.9, 0.9}), 1.0);
  add("gpt35 ratio mean 0", replay_ratio_gpt35(A{0, 0, 0}), 0.5);
  add("gpt35 ratio mean 0.4", replay_ratio_gpt35(A{0.4, 0.4, 0.4}), 0.7);
  add("glm4 ratio 1", replay_ratio_glm4(1.0), 0.5);
  add("glm4 ratio 0.25", replay_ratio_glm4(0.25), 0.5);
  add("glm4 ratio 0", replay_ratio_glm4(0.0), 0.5);

  // Composed bundles.
  const auto b4 = compute_weights("gpt4o", A{1, 1, 1}), b35 = compute_weights("gpt35", A{0, 0, 0}),
             bf = compute_weights("fixed", A{0.3, 0.6, 0.9});
  add("bundle gpt4o w_buffer", b4.w_buffer, 0.8);
  add("bundle gpt35 w_buffer", b35.w_buffer, 0.5);
  add("bundle gpt35 value cost", b35.value_cloning_cost, 0.01);
  add("bundle fixed ratio", bf.batch_replay_ratio, 0.75);
  add("bundle fixed value cost", bf.value_cloning_cost, 0.005);

  std::string bad;
  for (const auto& row : rows)
    if (!(std::abs(row.got - row.want) <= tol)) bad += fmt(" [%s]=%.17g", row.what.c_str(), row.got);
  return {bad.empty(), bad.empty() ? fmt("%zu tabulated values within 1e-12", rows.size()) : "off:" + bad};
}

// 3. p_old tracks w_buffer; one P_insert value.
Outcome buffer_convergence() {
  bool pass = true;
  std::string detail;
  for (double w : {0.5, 0.8, 0.95}) {
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ReplayBuffer b({1000, 0.2, 0.5});
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(w * 100)));
      auto entry = [](int gen) {
        BufferEntry e;
        e.trajectory.generation = gen;
        e.trajectory.steps.resize(1);
        return e;
      };
      b.set_target(w);
      for (int k = 0; k < 5000; ++k) b.offer(entry(0), rng);
      b.rollover(1);
      for (int k = 0; k < 50000; ++k) b.offer(entry(1), rng);
      ok += std::abs(b.p_old() - w) <= 0.05;
    }
    pass = pass && ok >= 4;
    detail += fmt("w=%.2f %d/5  ", w, ok);
  }
  const double p = compute_p_insert(0.9, 0.8, 0.2, 0.5);
  pass = pass && std::abs(p - 0.2556) < 5e-5;
  return {pass, detail + fmt("P_insert(0.9,0.8,0.2,0.5)=%.4f", p)};
}

// 4. Analytic gradient vs central differences, every loss term on.
Outcome gradient_check() {
  std::mt19937_64 rng(4242);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const NetShape shape{static_cast<std::size_t>(5 + draw % 4), static_cast<std::size_t>(3 + draw % 3), 6};
    const auto p = oracle::random_params(rng, shape);
    const auto batch = oracle::random_batch(rng, shape.obs_dim, 6, 3, 5, 0.5);
    EwcAnchor ewc;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      ewc.params.push_back(u(rng) - 0.5);
      ewc.fisher.push_back(u(rng));
    }
    ewc.lambda = 0.5;
    LossSpec spec;
    spec.weights = {0.4, 0.3, 0.05, 0.5};
    spec.ewc = &ewc;
    const auto g = gradient(p, batch, spec);
    worst = std::max(worst, oracle::finite_difference_check(p, batch, spec, g.targets, g.grad).max_rel_error);
  }
  return {worst < 1e-4, fmt("max relative error %.3g over 20 draws", worst)};
}

// 5. Naive single-task training learns Room-5x5.
Outcome learnability() {
  auto cfg = load_config((g_config_dir / "learnability.cfg").string());
  const auto results = run_seeds(cfg, out_dir("learnability"), 1, {}, true);
  int ok = 0;
  std::string per;
  for (const auto& r : results) {
    double best = -1e9;
    for (const auto& e : r.artifacts.reward_curves)
      if (e.global_step <= 200000) best = std::max(best, e.mean_return);
    ok += best >= 0.8;
    per += fmt(" %.2f", r.artifacts.eval_matrix.r[0].back());
  }
  return {ok >= 9, fmt("%d/%d seeds reached 0.8; final returns:%s", ok, cfg.n_seeds, per.c_str())};
}

// 6. sdw_full vs clear_fixed on the similar/dissimilar sequence.
Outcome directional() {
  auto cfg = load_config((g_config_dir / "directional.cfg").string());
  auto sdw = cfg, clear = cfg;
  sdw.plan.method = Method::SdwFull;
  sdw.plan.strategy_id = "gpt4o";
  clear.plan.method = Method::ClearFixed;
  const auto a = run_experiment(sdw, out_dir("directional/sdw_full"));
  const auto b = run_experiment(clear, out_dir("directional/clear_fixed"));
  std::vector<double> fa, fb, ta, tb;
  int wins = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    fa.push_back(a[k].metrics.F);
    fb.push_back(b[k].metrics.F);
    ta.push_back(a[k].metrics.T);
    tb.push_back(b[k].metrics.T);
    wins += a[k].metrics.F < b[k].metrics.F;
    std::cout << fmt("    seed %zu  sdw_full F=%+.4f T=%+.4f | clear_fixed F=%+.4f T=%+.4f\n", k, fa.back(), ta.back(),
                     fb.back(), tb.back());
  }
  const auto sa = summarize(fa), sb = summarize(fb), sta = summarize(ta), stb = summarize(tb);
  const bool pass = sa.mean < sb.mean && sta.mean >= stb.mean && wins >= 7;
  return {pass, fmt("mean F %.4f vs %.4f, mean T %.4f vs %.4f, F wins %d/%zu", sa.mean, sb.mean, sta.mean, stb.mean, wins,
                    a.size())};
}

ExperimentConfig small_three_task(int n_seeds) {
  auto cfg = load_config((g_config_dir / "directional.cfg").string(),
                         {"experiment.steps_per_segment = 2000", "experiment.eval_every = 1000",
                          "experiment.eval_episodes = 3", "agent.hidden = 16", "probe.steps = 128",
                          "experiment.n_seeds = " + std::to_string(n_seeds)});
  return cfg;
}

// 7. Ablation driver: four rows, each variant changes only its half of the bundle.
Outcome ablation_structure() {
  const auto cfg = small_three_task(2);
  const auto dir = out_dir("ablation");
  const auto rows = run_ablation(cfg, dir);
  const auto table = read_ablation_csv(dir / "ablation.csv");
  bool pass = rows.size() == 4 && table.size() == 4;
  std::vector<std::string> expect{"sdw_full", "sdw_buffer_only", "sdw_loss_only", "clear_fixed"};
  for (std::size_t k = 0; pass && k < 4; ++k) pass = table[k].method == expect[k];

  auto logs = [&](const std::string& m, int s) {
    return read_jsonl(dir / m / ("seed_" + std::to_string(s)) / "weights.jsonl");
  };
  int cost_mismatch = 0, ratio_mismatch = 0;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    const auto clear = logs("clear_fixed", s), buf = logs("sdw_buffer_only", s), loss = logs("sdw_loss_only", s);
    pass = pass && clear.size() == buf.size() && clear.size() == loss.size();
    for (std::size_t k = 0; pass && k < clear.size(); ++k) {
      const auto& c = clear[k]["applied"];
      cost_mismatch += buf[k]["applied"]["policy_cloning_cost"] != c["policy_cloning_cost"] ||
                       buf[k]["applied"]["value_cloning_cost"] != c["value_cloning_cost"];
      ratio_mismatch += loss[k]["applied"]["batch_replay_ratio"] != c["batch_replay_ratio"] ||
                        loss[k]["applied"]["w_buffer"] != c["w_buffer"];
    }
  }
  pass = pass && cost_mismatch == 0 && ratio_mismatch == 0;
  return {pass, fmt("%zu rows; buffer_only cost mismatches %d; loss_only ratio mismatches %d", table.size(), cost_mismatch,
                    ratio_mismatch)};
}

// 8. Same config and seed, same eval.csv bytes.
Outcome determinism() {
  auto cfg = small_three_task(1);
  cfg.plan.rounds = 2;
  const auto a = out_dir("determinism/a"), b = out_dir("determinism/b");
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  const auto x = slurp(a / "seed_0" / "eval.csv"), y = slurp(b / "seed_0" / "eval.csv");
  return {!x.empty() && x == y, fmt("eval.csv %zu bytes, identical=%s", x.size(), x == y ? "yes" : "no")};
}

// 9. Identity, range and symmetry of every similarity strategy.
Outcome similarity_properties() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> coin(0, 1), grid(5, 9);
  auto random_task = [&](int idx) {
    TaskDescriptor d;
    d.task_id = "t" + std::to_string(idx);
    d.family = coin(rng) ? Family::Room : Family::KeyRoom;
    d.grid_size = 5 + 2 * (grid(rng) % 3);
    d.dark = coin(rng);
    d.trap = coin(rng);
    d.lava = coin(rng);
    d.monster = coin(rng);
    d.randomized_start = coin(rng);
    d.max_steps = 60;
    return d;
  };
  auto probe_of = [&](const TaskDescriptor& d, std::uint64_t seed) {
    GridEnv env(d, seed, 9);
    const auto params = oracle::random_params(rng, {env.obs_dim(), 8, kNumActions}, 1.0);
    return collect_probe(env, params, 48, seed);
  };
  int identity_fail = 0, range_fail = 0, symmetry_fail = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto d1 = random_task(2 * k), d2 = random_task(2 * k + 1);
    const auto p1 = probe_of(d1, rng()), p2 = probe_of(d2, rng());
    for (const auto& id : similarity_strategies()) {
      const SimilarityInputs same{&d1, &d1, &p1, &p1}, pair{&d1, &d2, &p1, &p2};
      identity_fail += compute_similarity(id, same).s != std::array<double, 3>{1.0, 1.0, 1.0};
      for (double v : compute_similarity(id, pair).s) range_fail += !(v >= 0.0 && v <= 1.0);
    }
    symmetry_fail += descriptor_similarity(d1, d2).s != descriptor_similarity(d2, d1).s;
  }
  return {identity_fail + range_fail + symmetry_fail == 0,
          fmt("1000 probe pairs: identity failures %d, out-of-range %d, asymmetric descriptor %d", identity_fail, range_fail,
              symmetry_fail)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  g_out = fs::temp_directory_path() / "sdw_acceptance";
  if (const char* root = std::getenv("SDW_OUTPUT_ROOT"); root && *root) g_out = fs::path(root) / "acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only.push_back(std::atoi(argv[++i]));
    } else if (a == "--config-dir" && i + 1 < argc) {
      g_config_dir = argv[++i];
    } else if (a == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      std::cerr << "usage: sdw_acceptance [--only N]... [--config-dir DIR] [--out DIR]\n";
      return 2;
    }
  }
  warning_sink() = [](const std::string&) {};

  const std::vector<Criterion> all{
      {1, "metrics oracle equivalence", metrics_oracle},
      {2, "strategy-function fidelity", strategy_fidelity},
      {3, "buffer convergence", buffer_convergence},
      {4, "gradient correctness", gradient_check},
      {5, "learnability baseline", learnability},
      {6, "directional sdw_full vs clear_fixed", directional},
      {7, "ablation structure", ablation_structure},
      {8, "determinism", determinism},
      {9, "similarity properties", similarity_properties},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << " " << c.name << ": " << o.detail
              << fmt(" (%.1fs)", secs) << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
