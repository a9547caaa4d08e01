#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "sdw/losses.hpp"

using namespace sdw;

namespace {

Trajectory toy(std::vector<double> rewards, std::vector<bool> dones, std::vector<int> actions,
               std::vector<std::vector<double>> mu) {
  Trajectory t;
  for (std::size_t k = 0; k < rewards.size(); ++k) {
    Transition tr;
    tr.reward = rewards[k];
    tr.done = dones[k];
    tr.action = actions[k];
    tr.behavior_probs = mu[k];
    t.steps.push_back(tr);
  }
  return t;
}

}  // namespace

TEST_CASE("single-step episode with V = 0") {
  auto t = toy({1.0}, {true}, {0}, {{0.5, 0.5}});
  TrajectoryEval ev{{{0.5, 0.5}}, {0.0, 0.0}};
  const auto v = vtrace_targets(t, ev, {});
  CHECK(v.value_targets[0] == 1.0);
  CHECK(v.advantages[0] == 1.0);
}

TEST_CASE("on-policy targets with gamma 1 are bootstrapped returns") {
  auto t = toy({0.1, -0.2, 0.3, 0.4}, {false, false, false, false}, {0, 1, 0, 1},
               {{0.3, 0.7}, {0.6, 0.4}, {0.5, 0.5}, {0.2, 0.8}});
  TrajectoryEval ev;
  for (const auto& s : t.steps) ev.probs.push_back(s.behavior_probs);
  ev.values = {0.5, -0.1, 0.2, 0.7, 0.9};
  VtraceParams p;
  p.gamma = 1.0;
  const auto v = vtrace_targets(t, ev, p);
  for (std::size_t s = 0; s < 4; ++s) {
    double g = ev.values[4];
    for (std::size_t k = s; k < 4; ++k) g += t.steps[k].reward;
    CHECK(v.value_targets[s] == Catch::Approx(g).epsilon(1e-14));
  }
}

TEST_CASE("three-step sequence matches a hand-unrolled recursion") {
  auto t = toy({0.5, -0.25, 1.0}, {false, false, true}, {1, 0, 2},
               {{0.2, 0.5, 0.3}, {0.4, 0.4, 0.2}, {0.1, 0.1, 0.8}});
  TrajectoryEval ev{{{0.1, 0.6, 0.3}, {0.7, 0.2, 0.1}, {0.3, 0.3, 0.4}}, {0.2, -0.3, 0.6, 0.9}};
  const double g = 0.9;
  const auto v = vtrace_targets(t, ev, {g, 1.0, 1.0});

  const double r0 = std::min(1.0, 0.6 / 0.5), r1 = std::min(1.0, 0.7 / 0.4), r2 = std::min(1.0, 0.4 / 0.8);
  const double c0 = r0, c1 = r1;
  const double V0 = 0.2, V1 = -0.3, V2 = 0.6;
  const double d2 = r2 * (1.0 + 0.0 - V2);
  const double d1 = r1 * (-0.25 + g * V2 - V1);
  const double d0 = r0 * (0.5 + g * V1 - V0);
  const double v2 = V2 + d2;
  const double v1 = V1 + d1 + g * c1 * (v2 - V2);
  const double v0 = V0 + d0 + g * c0 * (v1 - V1);
  CHECK(std::abs(v.value_targets[0] - v0) < 1e-12);
  CHECK(std::abs(v.value_targets[1] - v1) < 1e-12);
  CHECK(std::abs(v.value_targets[2] - v2) < 1e-12);
  CHECK(std::abs(v.advantages[0] - r0 * (0.5 + g * v1 - V0)) < 1e-12);
  CHECK(std::abs(v.advantages[1] - r1 * (-0.25 + g * v2 - V1)) < 1e-12);
  CHECK(std::abs(v.advantages[2] - r2 * (1.0 - V2)) < 1e-12);
}

TEST_CASE("zero behavior probability for the taken action is a numerical error") {
  auto t = toy({0.0}, {false}, {1}, {{1.0, 0.0}});
  TrajectoryEval ev{{{0.5, 0.5}}, {0.0, 0.0}};
  CHECK_THROWS_AS(vtrace_targets(t, ev, {}), NumericalError);
}

TEST_CASE("policy gradient loss") {
  TrainBatch batch{toy({0.0}, {false}, {0}, {{0.5, 0.5}})};
  BatchEval ev{{{{0.5, 0.5}}, {0.0, 0.0}}};
  std::vector<VtraceTargets> targets{{{0.0}, {0.0}}};
  CHECK(policy_gradient_loss(batch, ev, targets) == 0.0);
  targets[0].advantages[0] = 1.0;
  CHECK(policy_gradient_loss(batch, ev, targets) == Catch::Approx(-std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("policy cloning loss") {
  SECTION("identical policies give zero") {
    std::mt19937_64 rng(1);
    auto batch = oracle::random_batch(rng, 4, 5, 3, 4, 1.0);
    BatchEval ev(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (const auto& s : batch[i].steps) ev[i].probs.push_back(s.behavior_probs);
    CHECK(policy_cloning_loss(batch, ev) == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("one-hot behavior against uniform current") {
    auto t = toy({0.0}, {false}, {2}, {{0, 0, 1, 0}});
    t.is_replay = true;
    BatchEval ev{{{{0.25, 0.25, 0.25, 0.25}}, {0.0, 0.0}}};
    CHECK(policy_cloning_loss({t}, ev) == Catch::Approx(std::log(4.0)).epsilon(1e-15));
  }
  SECTION("random pairs against a direct sum") {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 100; ++k) {
      const auto p = oracle::random_probs(rng, 6);
      const auto q = oracle::random_probs(rng, 6);
      double direct = 0.0;
      for (std::size_t a = 0; a < 6; ++a) direct += p[a] * std::log(p[a] / q[a]);
      CHECK(std::abs(kl_divergence(p, q) - direct) < 1e-12);
    }
  }
  SECTION("fresh data contributes nothing") {
    auto t = toy({0.0}, {false}, {2}, {{0, 0, 1, 0}});
    BatchEval ev{{{{0.25, 0.25, 0.25, 0.25}}, {0.0, 0.0}}};
    CHECK(policy_cloning_loss({t}, ev) == 0.0);
  }
}

TEST_CASE("value cloning loss") {
  auto t = toy({0.0}, {false}, {0}, {{1.0}});
  t.is_replay = true;
  t.steps[0].behavior_value = 0.25;
  BatchEval ev{{{{1.0}}, {0.25, 0.0}}};
  CHECK(value_cloning_loss({t}, ev) == 0.0);
  ev[0].values[0] = 0.75;
  CHECK(value_cloning_loss({t}, ev) == 0.25);

  std::mt19937_64 rng(3);
  auto batch = oracle::random_batch(rng, 4, 3, 4, 5, 0.6);
  batch[0].is_replay = true;
  BatchEval be(batch.size());
  std::uniform_real_distribution<double> u(-1, 1);
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (const auto& s : batch[i].steps) {
      be[i].probs.push_back(s.behavior_probs);
      be[i].values.push_back(u(rng));
      if (batch[i].is_replay) {
        const double d = be[i].values.back() - s.behavior_value;
        sum += d * d;
        ++n;
      }
    }
    be[i].values.push_back(0.0);
  }
  CHECK(value_cloning_loss(batch, be) == Catch::Approx(sum / n).epsilon(1e-14));
}

TEST_CASE("total loss composition") {
  std::mt19937_64 rng(4);
  auto batch = oracle::random_batch(rng, 4, 3, 4, 5, 0.5);
  batch[0].is_replay = true;
  BatchEval ev(batch.size());
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t k = 0; k < batch[i].steps.size(); ++k) {
      ev[i].probs.push_back(oracle::random_probs(rng, 3));
      ev[i].values.push_back(u(rng));
    }
    ev[i].values.push_back(u(rng));
  }
  const auto targets = vtrace_targets(batch, ev, {});

  SECTION("manual sum with cloning weights (0.01, 0.005)") {
    LossWeights w{0.01, 0.005, 0.01, 0.5};
    const auto t = total_loss(batch, ev, targets, w);
    const double manual = policy_gradient_loss(batch, ev, targets) + 0.5 * value_loss(batch, ev, targets) -
                          0.01 * mean_entropy(batch, ev) + 0.01 * policy_cloning_loss(batch, ev) +
                          0.005 * value_cloning_loss(batch, ev);
    CHECK(t.total == Catch::Approx(manual).epsilon(1e-14));
  }
  SECTION("zero cloning costs reduce to the policy-optimization loss") {
    const auto t = total_loss(batch, ev, targets, {0.0, 0.0, 0.01, 0.5});
    const auto big = total_loss(batch, ev, targets, {5.0, 7.0, 0.01, 0.5});
    CHECK(t.total == Catch::Approx(big.total - 5.0 * big.policy_cloning - 7.0 * big.value_cloning).epsilon(1e-12));
  }
  SECTION("matching behavior makes consistency terms vanish") {
    BatchEval same = ev;
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t k = 0; k < batch[i].steps.size(); ++k) {
        same[i].probs[k] = batch[i].steps[k].behavior_probs;
        same[i].values[k] = batch[i].steps[k].behavior_value;
      }
    const auto tg = vtrace_targets(batch, same, {});
    const auto a = total_loss(batch, same, tg, {0.0, 0.0, 0.01, 0.5});
    const auto b = total_loss(batch, same, tg, {3.0, 9.0, 0.01, 0.5});
    CHECK(b.total == Catch::Approx(a.total).margin(1e-14));
  }
  SECTION("negative weights clamp to zero") {
    const auto a = total_loss(batch, ev, targets, {-1.0, -1.0, 0.01, 0.5});
    const auto b = total_loss(batch, ev, targets, {0.0, 0.0, 0.01, 0.5});
    CHECK(a.total == b.total);
  }
  SECTION("non-finite totals raise") {
    BatchEval bad = ev;
    bad[0].values[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(total_loss(batch, bad, targets, {}), NumericalError);
  }
}

TEST_CASE("ewc penalty") {
  std::vector<double> theta{1.0, 2.0, 3.0};
  CHECK(ewc_penalty(theta, theta, std::vector<double>{1, 1, 1}, 5.0) == 0.0);
  std::vector<double> anchor{1.0, 0.0, 3.0};
  CHECK(ewc_penalty(theta, anchor, std::vector<double>{1, 1, 1}, 1.0) == 2.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  EwcAnchor a;
  std::vector<double> p(10);
  for (std::size_t k = 0; k < 10; ++k) p[k] = u(rng), a.params.push_back(u(rng)), a.fisher.push_back(u(rng) + 1.0);
  a.lambda = 3.0;
  std::vector<double> grad(10, 0.0);
  add_ewc_gradient(p, a, grad);
  const double h = 1e-5;
  for (std::size_t k = 0; k < 10; ++k) {
    auto up = p, dn = p;
    up[k] += h;
    dn[k] -= h;
    const double fd = (ewc_penalty(up, a.params, a.fisher, a.lambda) - ewc_penalty(dn, a.params, a.fisher, a.lambda)) / (2 * h);
    CHECK(std::abs(fd - grad[k]) / std::max(std::abs(fd), 1e-8) < 1e-4);
  }
}
