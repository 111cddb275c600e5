#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "riskctl/mdp_gen.hpp"
#include "riskctl/tabular.hpp"

using namespace riskctl;

namespace {

FiniteHorizonMDP bandit(double c0, double c1) { return FiniteHorizonMDP(1, 2, 1, {1.0, 1.0}, {c0, c1}, {0.0}, {1.0}); }

FiniteHorizonMDP stochastic(std::uint64_t seed, int S = 2, int A = 2, int T = 2) {
  Rng rng(seed);
  RandomMdpOptions o;
  o.num_states = S;
  o.num_actions = A;
  o.horizon = T;
  o.single_initial_state = true;
  return random_mdp(rng, o);
}

double max_policy_diff(const TabularPolicy& a, const TabularPolicy& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace

TEST(SolveLp, SymmetricBanditIsUniform) {
  const auto r = solve_lp(bandit(1.0, 1.0), {0.5, 1.0});
  EXPECT_NEAR(r.policy(0, 0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r.policy(0, 0, 1), 0.5, 1e-15);
  EXPECT_NEAR(r.values.V(0, 0), 1.0 - std::log(2.0), 1e-14);
}

TEST(SolveLp, DeterministicChainPoliciesAgreeAcrossEta) {
  Rng rng(5);
  const auto m = deterministic_chain(rng, 3, 2, 3);
  const auto a = solve_lp(m, {0.5, 1.0});
  const auto b = solve_lp(m, {-0.5, 1.0});
  EXPECT_LE(max_policy_diff(a.policy, b.policy), 1e-12);
}

TEST(SolveLp, MatchesEnumeration) {
  const auto m = stochastic(2024);
  const auto r = solve_lp(m, {0.5, 1.0});
  EXPECT_NEAR(r.values.V(0, 0), oracle::lp_objective(m, r.policy, 0.5, 1.0), 1e-10);
  EXPECT_NEAR(r.values.V(0, 0), evaluate_objective_exact(m, r.policy, {0.5, 1.0}, ObjectiveKind::LP), 1e-10);
}

TEST(SolveLp, GeneralEpsilonMatchesEnumeration) {
  const auto m = stochastic(9, 3, 2, 3);
  for (double eps : {0.5, 2.0}) {
    const auto r = solve_lp(m, {0.3, eps});
    EXPECT_NEAR(r.values.V(0, 0), oracle::lp_objective(m, r.policy, 0.3, eps), 1e-10);
  }
}

TEST(SolveLp, RejectsEtaMinusOne) { EXPECT_THROW(solve_lp(bandit(0, 1), {-1.0, 1.0}), InvalidRisk); }

TEST(SolveLp, UniformNoiseIncreasesObjective) {
  const auto m = stochastic(77, 3, 3, 3);
  const RiskParams p{0.5, 1.0};
  const auto r = solve_lp(m, p);
  TabularPolicy noisy = r.policy;
  for (int t = 0; t < m.horizon(); ++t)
    for (int x = 0; x < m.num_states(); ++x)
      for (int u = 0; u < m.num_actions(); ++u) noisy.at(t, x, u) = 0.99 * r.policy(t, x, u) + 0.01 / m.num_actions();
  const double opt = evaluate_objective_exact(m, r.policy, p, ObjectiveKind::LP);
  EXPECT_GT(evaluate_objective_exact(m, noisy, p, ObjectiveKind::LP), opt);
}

TEST(SolveLp, GibbsAndSoftBellmanConsistency) {
  const auto m = stochastic(31, 3, 3, 3);
  for (double eps : {1.0, 0.7}) {
    const auto r = solve_lp(m, {0.8, eps});
    for (int t = 0; t < m.horizon(); ++t)
      for (int x = 0; x < m.num_states(); ++x) {
        double lo = 1e300, hi = -1e300, lse_acc = 0.0;
        for (int u = 0; u < m.num_actions(); ++u) {
          const double k = std::log(r.policy(t, x, u)) + r.values.Q(t, x, u) / eps;
          lo = std::min(lo, k);
          hi = std::max(hi, k);
          lse_acc += std::exp(-r.values.Q(t, x, u) / eps);
        }
        EXPECT_LE(hi - lo, 1e-10 * std::max(1.0, std::abs(hi)));
        EXPECT_NEAR(-eps * std::log(lse_acc), r.values.V(t, x), 1e-12);
      }
  }
}

TEST(SolveLp, ConvergesMonotonicallyToMaxEnt) {
  const auto m = stochastic(8, 3, 3, 3);
  const auto base = solve_maxent(m);
  double prev = 1e300;
  for (double eta : {1e-1, 1e-2, 1e-3}) {
    const double d = max_policy_diff(solve_lp(m, {eta, 1.0}).policy, base.policy);
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(SolveRenyi, LastStageMatchesLp) {
  const auto m = stochastic(12, 3, 2, 3);
  const auto a = solve_lp(m, {0.5, 1.0});
  const auto b = solve_renyi(m, {0.5, 1.0});
  const int t = m.horizon() - 1;
  for (int x = 0; x < m.num_states(); ++x)
    for (int u = 0; u < m.num_actions(); ++u) EXPECT_NEAR(a.policy(t, x, u), b.policy(t, x, u), 1e-12);
}

TEST(SolveRenyi, BanditHandValue) {
  const auto r = solve_renyi(bandit(0.0, 1.0), {0.5, 1.0});
  const double z = 1.0 + std::exp(-1.0);
  EXPECT_NEAR(r.policy(0, 0, 0), 1.0 / z, 1e-14);
  EXPECT_NEAR(r.policy(0, 0, 1), std::exp(-1.0) / z, 1e-14);
  EXPECT_NEAR(r.values.V(0, 0), -2.0 * std::log(1.0 + std::exp(-0.5)), 1e-14);
}

TEST(SolveRenyi, SmallEtaApproachesMaxEnt) {
  const auto m = stochastic(13, 3, 3, 3);
  EXPECT_LE(max_policy_diff(solve_renyi(m, {1e-6, 1.0}).policy, solve_maxent(m).policy), 1e-4);
}

TEST(SolveRenyi, MatchesEnumeration) {
  const auto m = stochastic(14, 2, 3, 3);
  for (double eta : {-0.5, 0.5}) {
    const auto r = solve_renyi(m, {eta, 1.0});
    EXPECT_NEAR(r.values.V(0, 0), oracle::renyi_objective(m, r.policy, eta, 1.0), 1e-10);
  }
}

TEST(SolveMaxEnt, EqualsLpOnDeterministicModel) {
  Rng rng(21);
  const auto m = deterministic_chain(rng, 3, 3, 3);
  const auto base = solve_maxent(m);
  for (double eta : {-0.7, 0.4, 3.0}) {
    const auto r = solve_lp(m, {eta, 1.0});
    EXPECT_LE(max_policy_diff(r.policy, base.policy), 1e-10);
    for (int x = 0; x < 3; ++x) EXPECT_NEAR(r.values.V(0, x), base.values.V(0, x), 1e-10);
  }
}

TEST(SolveMaxEnt, SmallEtaLpValuesClose) {
  const auto m = stochastic(15, 3, 2, 3);
  const auto a = solve_lp(m, {1e-6, 1.0});
  const auto b = solve_maxent(m);
  for (int t = 0; t <= m.horizon(); ++t)
    for (int x = 0; x < m.num_states(); ++x) EXPECT_LE(std::abs(a.values.V(t, x) - b.values.V(t, x)), 1e-4);
}

TEST(SolveMaxEnt, SymmetricBanditUniform) {
  const auto r = solve_maxent(bandit(0.3, 0.3));
  EXPECT_DOUBLE_EQ(r.policy(0, 0, 0), 0.5);
}

TEST(SolveLp, ZeroEtaRoutesToMaxEnt) {
  const auto m = stochastic(16);
  EXPECT_EQ(solve_lp(m, {0.0, 1.0}).kind, SolveKind::MaxEnt);
}

TEST(CaiPosterior, BanditSoftmin) {
  const auto r = solve_cai_posterior(bandit(0.0, 1.0));
  const double z = 1.0 + std::exp(-1.0);
  EXPECT_NEAR(r.policy(0, 0, 0), 1.0 / z, 1e-14);
}

TEST(CaiPosterior, EqualsEtaMinusOneRecursion) {
  const auto m = stochastic(17, 3, 3, 3);
  const auto post = solve_cai_posterior(m);
  const auto raw = detail::lp_recursion_unchecked(m, -1.0, 1.0, 0.0);
  EXPECT_LE(max_policy_diff(post.policy, raw.policy), 1e-12);
  for (int t = 0; t <= m.horizon(); ++t)
    for (int x = 0; x < m.num_states(); ++x)
      EXPECT_NEAR(post.values.V(t, x), raw.values.V(t, x) + (m.horizon() - t) * std::log(3.0), 1e-12);
}

TEST(CaiPosterior, LimitFromAbove) {
  const auto m = stochastic(18, 3, 3, 3);
  EXPECT_LE(max_policy_diff(solve_lp(m, {-1.0 + 1e-4, 1.0}).policy, solve_cai_posterior(m).policy), 1e-3);
}

TEST(Objective, DeterministicPolicyOnDeterministicModelIsPathCost) {
  Rng rng(19);
  const auto m = deterministic_chain(rng, 3, 2, 3);
  TabularPolicy pi(3, 3, 2);
  for (int t = 0; t < 3; ++t)
    for (int x = 0; x < 3; ++x) pi.at(t, x, (t + x) % 2) = 1.0;
  int x = 0;
  double c = 0.0;
  for (int t = 0; t < 3; ++t) {
    const int u = (t + x) % 2;
    c += m.cost(t, x, u);
    x = m.successor(t, x, u);
  }
  c += m.terminal_cost(x);
  for (double eta : {-0.5, 0.7, 2.0})
    EXPECT_NEAR(evaluate_objective_exact(m, pi, {eta, 1.0}, ObjectiveKind::LP), c, 1e-13);
}

TEST(Objective, AggregatesOverInitialDistribution) {
  Rng rng(20);
  RandomMdpOptions o;
  o.num_states = 3;
  o.horizon = 2;
  const auto m = random_mdp(rng, o);
  const auto r = solve_lp(m, {0.6, 1.0});
  EXPECT_NEAR(r.initial_value, evaluate_objective_exact(m, r.policy, {0.6, 1.0}, ObjectiveKind::LP), 1e-10);
}

TEST(Objective, PathBudget) {
  const auto m = stochastic(22, 3, 3, 3);
  ObjectiveOptions tiny;
  tiny.path_budget = 10;
  EXPECT_THROW(evaluate_objective_exact(m, TabularPolicy::uniform(3, 3, 3), {0.5, 1.0}, ObjectiveKind::LP, tiny),
               TooLarge);
}

TEST(LinearizedBellman, TwoFreeActions) {
  const auto e = linearized_bellman(bandit(0.0, 0.0));
  EXPECT_NEAR(e[0][0], 2.0, 1e-15);
  EXPECT_NEAR(solve_lp(bandit(0.0, 0.0), {0.5, 1.0}).values.V(0, 0), -std::log(2.0), 1e-15);
}

TEST(LinearizedBellman, MatchesLpOnChain) {
  Rng rng(23);
  const auto m = deterministic_chain(rng, 4, 3, 3);
  const auto e = linearized_bellman(m);
  const auto r = solve_lp(m, {0.7, 1.0});
  for (int t = 0; t <= 3; ++t)
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(std::exp(-r.values.V(t, x)), e[t][x], 1e-10);
}

TEST(LinearizedBellman, StochasticInputRejected) {
  EXPECT_THROW(linearized_bellman(stochastic(24)), NotDeterministic);
}

TEST(SolveLp, LargeEtaStaysFinite) {
  Rng rng(25);
  RandomMdpOptions o;
  o.num_states = 3;
  o.horizon = 3;
  o.cost_scale = 200.0;
  const auto r = solve_lp(random_mdp(rng, o), {5.0, 1.0});
  EXPECT_TRUE(std::isfinite(r.initial_value));
}
