#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "riskctl/envs.hpp"
#include "riskctl/mdp_gen.hpp"

using namespace riskctl;
using std::numbers::pi;

TEST(Pendulum, UprightEquilibrium) {
  const auto tr = pendulum_step({0.0, 0.0}, 0.0, {});
  EXPECT_EQ(tr.next.theta, 0.0);
  EXPECT_EQ(tr.next.theta_dot, 0.0);
  EXPECT_EQ(tr.cost, 0.0);
}

TEST(Pendulum, HangingEquilibrium) {
  const auto tr = pendulum_step({pi, 0.0}, 0.0, {});
  EXPECT_NEAR(tr.next.theta_dot, 0.0, 1e-14);
  EXPECT_NEAR(tr.next.theta, pi, 1e-15);
  EXPECT_NEAR(tr.cost, pi * pi, 1e-14);
}

TEST(Pendulum, HandArithmeticStep) {
  const auto tr = pendulum_step({pi / 2, 0.0}, 1.0, {});
  EXPECT_NEAR(tr.next.theta_dot, 0.9, 1e-14);
  EXPECT_NEAR(tr.next.theta, pi / 2 + 0.045, 1e-14);
  EXPECT_NEAR(tr.cost, (pi / 2) * (pi / 2) + 0.001, 1e-14);
}

TEST(Pendulum, TorqueAndSpeedClipped) {
  const auto a = pendulum_step({0.3, 0.0}, 50.0, {});
  const auto b = pendulum_step({0.3, 0.0}, 2.0, {});
  EXPECT_EQ(a.next.theta_dot, b.next.theta_dot);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_LE(pendulum_step({1.0, 7.9}, 2.0, {}).next.theta_dot, 8.0);
}

TEST(Pendulum, WrapIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
  EXPECT_NEAR(wrap_angle(3 * pi + 0.5), -pi + 0.5, 1e-12);
}

TEST(Pendulum, CostBounds) {
  Rng rng(1);
  const double hi = pi * pi + 0.1 * 64 + 0.001 * 4;
  for (int i = 0; i < 100000; ++i) {
    const PendulumState s{rng.uniform(-20.0, 20.0), rng.uniform(-8.0, 8.0)};
    const double c = pendulum_step(s, rng.uniform(-5.0, 5.0), {}).cost;
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, hi);
  }
}

TEST(Pendulum, ResetDistribution) {
  PendulumConfig cfg;
  Rng a(2), b(2);
  EXPECT_EQ(pendulum_reset(cfg, a).theta, pendulum_reset(cfg, b).theta);
  Rng rng(3);
  const int N = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto s = pendulum_reset(cfg, rng);
    ASSERT_GE(s.theta_dot, -1.0);
    ASSERT_LE(s.theta_dot, 1.0);
    sum += s.theta;
    sq += s.theta * s.theta;
  }
  const double mean = sum / N;
  const double se = std::sqrt((sq / N - mean * mean) / N);
  EXPECT_LE(std::abs(mean), 3 * se);
}

TEST(Pendulum, EnergyDriftFromNearUpright) {
  PendulumConfig cfg;
  const double k = 3.0 * cfg.gravity / (2.0 * cfg.length);
  // Energy measured from the hanging rest point; theta = 0 is upright.
  auto energy = [&](const PendulumState& s) { return 0.5 * s.theta_dot * s.theta_dot + k * (1.0 + std::cos(s.theta)); };
  PendulumState s{0.1, 0.0};
  const double e0 = energy(s);
  // The symplectic update oscillates around a shadow energy with relative
  // amplitude of order omega * dt; what must not happen is secular growth.
  double turning_worst = 0.0, first_half = 0.0, second_half = 0.0;
  int turns = 0;
  for (int t = 0; t < 200; ++t) {
    const auto next = pendulum_step(s, 0.0, cfg).next;
    ASSERT_LT(std::abs(next.theta_dot), cfg.max_speed);
    const double dev = std::abs(energy(next) - e0);
    (t < 100 ? first_half : second_half) = std::max(t < 100 ? first_half : second_half, dev);
    if (t > 0 && (next.theta_dot > 0) != (s.theta_dot > 0)) {
      turning_worst = std::max(turning_worst, dev);
      ++turns;
    }
    s = next;
  }
  EXPECT_GE(turns, 4);
  EXPECT_LE(turning_worst, 0.05 * e0);
  EXPECT_LE(std::max(first_half, second_half), 0.1 * e0);
  EXPECT_LE(second_half, 1.1 * first_half);
}

TEST(Pendulum, StepIsPure) {
  const PendulumState s{0.7, -1.3};
  const auto a = pendulum_step(s, 0.4, {}), b = pendulum_step(s, 0.4, {});
  EXPECT_EQ(a.next.theta, b.next.theta);
  EXPECT_EQ(a.cost, b.cost);
}

TEST(PendulumEnv, EpisodeLengthAndObservation) {
  PendulumEnv env;
  Rng rng(4);
  const auto obs = env.reset(rng);
  ASSERT_EQ(obs.size(), 3u);
  EXPECT_NEAR(obs[0] * obs[0] + obs[1] * obs[1], 1.0, 1e-12);
  const double u = 0.0;
  EnvStep st;
  int steps = 0;
  do {
    st = env.step(std::span<const double>(&u, 1));
    ++steps;
  } while (!st.done);
  EXPECT_EQ(steps, 200);
  EXPECT_FALSE(st.terminal);
}

TEST(MdpEnv, DeterministicActionSequenceMatchesTables) {
  Rng g(5);
  const auto m = deterministic_chain(g, 4, 3, 3);
  MdpEnv env(m);
  Rng rng(6);
  env.reset(rng);
  const int us[3] = {2, 0, 1};
  int x = 0;
  double total = 0.0, expect = 0.0;
  for (int t = 0; t < 3; ++t) {
    const auto st = env.step_index(us[t]);
    expect += m.cost(t, x, us[t]);
    x = m.successor(t, x, us[t]);
    EXPECT_EQ(st.observation[x], 1.0);
    total += st.cost;
    EXPECT_EQ(st.done, t == 2);
  }
  expect += m.terminal_cost(x);
  EXPECT_NEAR(total, expect, 1e-14);
}

TEST(MdpEnv, TransitionFrequencies) {
  Rng g(7);
  RandomMdpOptions o;
  o.num_states = 3;
  o.num_actions = 2;
  o.horizon = 1;
  o.single_initial_state = true;
  const auto m = random_mdp(g, o);
  MdpEnv env(m);
  Rng rng(8);
  const int N = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < N; ++i) {
    env.reset(rng);
    const auto st = env.step_index(1);
    for (int y = 0; y < 3; ++y) counts[y] += st.observation[y] == 1.0;
  }
  for (int y = 0; y < 3; ++y) {
    const double p = m.p(0, 0, 1, y);
    EXPECT_LE(std::abs(static_cast<double>(counts[y]) / N - p), 3 * std::sqrt(p * (1 - p) / N) + 1e-12);
  }
}

TEST(MdpEnv, SteppingPastHorizonThrows) {
  Rng g(9);
  MdpEnv env(deterministic_chain(g, 2, 2, 1));
  Rng rng(10);
  env.reset(rng);
  env.step_index(0);
  EXPECT_THROW(env.step_index(0), InvalidModel);
}
