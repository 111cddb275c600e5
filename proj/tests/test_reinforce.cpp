#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "riskctl/mdp_gen.hpp"
#include "riskctl/reinforce.hpp"

using namespace riskctl;

namespace {

FiniteHorizonMDP small_mdp(std::uint64_t seed, int S = 2, int A = 2, int T = 2) {
  Rng rng(seed);
  RandomMdpOptions o;
  o.num_states = S;
  o.num_actions = A;
  o.horizon = T;
  return random_mdp(rng, o);
}

// State 0 is only visited at t = 0 and state 1 only at t = 1, so the best
// time-varying policy is representable by a time-invariant one.
FiniteHorizonMDP invariant_fixture(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> cost(8);
  for (int x = 0; x < 2; ++x)
    for (int u = 0; u < 2; ++u) cost[x * 2 + u] = cost[4 + x * 2 + u] = rng.uniform(0.0, 2.0);
  std::vector<double> p{0, 1, 0, 1, 0, 1, 0, 1};
  std::vector<double> transition = p;
  transition.insert(transition.end(), p.begin(), p.end());
  return FiniteHorizonMDP(2, 2, 2, transition, cost, {0.0, 0.0}, {1.0, 0.0});
}

SoftmaxPolicyParams random_params(const FiniteHorizonMDP& m, Rng& rng) {
  SoftmaxPolicyParams p(m.num_states(), m.num_actions());
  for (auto& l : p.logits) l = rng.uniform(-1.0, 1.0);
  return p;
}

std::vector<double> fd_gradient(const FiniteHorizonMDP& m, const SoftmaxPolicyParams& p, double eta, double h = 1e-5) {
  std::vector<double> g(p.logits.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto up = p.logits, dn = p.logits;
    up[j] += h;
    dn[j] -= h;
    g[j] = (oracle::exp_objective(m, up, eta) - oracle::exp_objective(m, dn, eta)) / (2.0 * h * eta);
  }
  return g;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(SampleTrajectory, DominantLogitsAreDeterministic) {
  Rng g(1);
  const auto m = deterministic_chain(g, 3, 2, 3);
  SoftmaxPolicyParams p(3, 2);
  for (int x = 0; x < 3; ++x) {
    p.logit(x, 0) = 50.0;
    p.logit(x, 1) = -50.0;
  }
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto tr = sample_trajectory(m, p, rng);
    for (int t = 0; t < 3; ++t) EXPECT_EQ(tr.actions[t], 0);
  }
}

TEST(SampleTrajectory, SeedReproducible) {
  const auto m = small_mdp(3);
  SoftmaxPolicyParams p(2, 2);
  Rng a(4), b(4);
  const auto ta = sample_trajectory(m, p, a), tb = sample_trajectory(m, p, b);
  EXPECT_EQ(ta.states, tb.states);
  EXPECT_EQ(ta.actions, tb.actions);
}

TEST(SampleTrajectory, ActionFrequenciesMatchSoftmax) {
  const auto m = small_mdp(5);
  SoftmaxPolicyParams p(2, 2);
  p.logit(0, 0) = 0.4;
  p.logit(1, 1) = -0.8;
  Rng rng(6);
  std::vector<int> hits(2, 0), visits(2, 0);
  for (int i = 0; i < 100000; ++i) {
    const auto tr = sample_trajectory(m, p, rng);
    ++visits[tr.states[0]];
    hits[tr.states[0]] += tr.actions[0] == 0;
  }
  for (int x = 0; x < 2; ++x) {
    if (visits[x] < 1000) continue;
    const double q = p.probs(x)[0];
    const double se = std::sqrt(q * (1 - q) / visits[x]);
    EXPECT_LE(std::abs(static_cast<double>(hits[x]) / visits[x] - q), 3 * se);
  }
}

TEST(GradEstimate, NoDegreesOfFreedomGivesZero) {
  const FiniteHorizonMDP m(1, 1, 3, {1, 1, 1}, {0.3, 0.1, 0.9}, {0.2}, {1.0});
  SoftmaxPolicyParams p(1, 1);
  Rng rng(7);
  std::vector<Trajectory> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(sample_trajectory(m, p, rng));
  EXPECT_EQ(grad_estimate(batch, p, 0.5).grad[0], 0.0);
  EXPECT_EQ(exact_gradient_oracle(m, p, 0.5)[0], 0.0);
}

TEST(ExactGradient, MatchesFiniteDifference) {
  for (std::uint64_t seed : {8, 9, 10}) {
    const auto m = small_mdp(seed);
    Rng rng(seed);
    const auto p = random_params(m, rng);
    for (double eta : {0.5, -0.5}) {
      const auto exact = exact_gradient_oracle(m, p, eta);
      const auto fd = fd_gradient(m, p, eta);
      const double scale = max_abs(fd);
      for (std::size_t j = 0; j < fd.size(); ++j) EXPECT_LE(std::abs(exact[j] - fd[j]), 1e-6 * scale);
    }
  }
}

TEST(ExactGradient, BaselineInvariance) {
  const auto m = small_mdp(11, 3, 2, 3);
  Rng rng(12);
  const auto p = random_params(m, rng);
  std::vector<double> table(9);
  for (auto& b : table) b = rng.uniform(-3.0, 3.0);
  const Baseline b = [&](int t, int x) { return table[t * 3 + x]; };
  for (double eta : {0.5, -0.5, 1.0}) {
    const auto g0 = exact_gradient_oracle(m, p, eta);
    const auto g1 = exact_gradient_oracle(m, p, eta, b);
    for (std::size_t j = 0; j < g0.size(); ++j) EXPECT_LE(std::abs(g0[j] - g1[j]), 1e-10);
  }
}

TEST(ExactGradient, VanishesLinearlyAtMinusOne) {
  const auto m = small_mdp(13);
  Rng rng(14);
  const auto p = random_params(m, rng);
  const auto g1 = exact_gradient_oracle(m, p, -1.0 + 1e-6);
  const auto g2 = exact_gradient_oracle(m, p, -1.0 + 2e-6);
  for (std::size_t j = 0; j < g1.size(); ++j) {
    if (std::abs(g1[j]) < 1e-14) continue;
    EXPECT_NEAR(g2[j] / g1[j], 2.0, 1e-3);
  }
  EXPECT_LT(max_abs(g1), 1e-4);
}

TEST(ExactGradient, SymmetricModelUniformLogits) {
  // Both actions share costs and transitions.
  const FiniteHorizonMDP m(2, 2, 2, {0.4, 0.6, 0.4, 0.6, 0.9, 0.1, 0.9, 0.1, 0.4, 0.6, 0.4, 0.6, 0.9, 0.1, 0.9, 0.1},
                           {0.3, 0.3, 1.2, 1.2, 0.5, 0.5, 0.1, 0.1}, {0.7, 0.0}, {0.5, 0.5});
  SoftmaxPolicyParams p(2, 2);
  for (double eta : {0.5, -0.5})
    for (double g : exact_gradient_oracle(m, p, eta)) EXPECT_NEAR(g, 0.0, 1e-14);
}

TEST(GradEstimate, ConsistentWithExactExpectation) {
  const auto m = small_mdp(15);
  Rng rng(16);
  const auto p = random_params(m, rng);
  const double eta = 0.5;
  std::vector<Trajectory> batch;
  for (int i = 0; i < 100000; ++i) batch.push_back(sample_trajectory(m, p, rng));
  const auto est = grad_estimate(batch, p, eta);
  const auto exact = exact_gradient_oracle(m, p, eta);
  for (std::size_t j = 0; j < exact.size(); ++j) {
    const double se = std::sqrt(est.coordinate_variance[j] / est.num_samples);
    EXPECT_LE(std::abs(est.grad[j] - exact[j]), 3.0 * se + 1e-12) << "coordinate " << j;
  }
}

TEST(TrainReinforce, ReachesTabularOptimum) {
  const auto m = invariant_fixture(17);
  const double eta = 0.5;
  ReinforceConfig cfg;
  cfg.lr = 0.05;
  cfg.batch = 64;
  cfg.iters = 500;
  Rng rng(18);
  const auto res = train_reinforce(m, SoftmaxPolicyParams(2, 2), eta, cfg, rng);
  const double got = evaluate_objective_exact(m, res.params.as_tabular(2), {eta, 1.0}, ObjectiveKind::LP);
  const double opt = solve_lp(m, {eta, 1.0}).initial_value;
  EXPECT_LE(std::abs(got - opt), 1e-2);
  EXPECT_EQ(res.log.rows.size(), 500u);
}

TEST(TrainReinforce, SmallEtaTracksMaxEntReinforce) {
  const auto m = small_mdp(19, 2, 2, 2);
  const double eta = 1e-6;
  ReinforceConfig cfg;
  cfg.iters = 1;
  cfg.batch = 64;
  cfg.lr = 0.05;
  cfg.baseline_mode = BaselineMode::MeanReturn;

  SoftmaxPolicyParams risk(2, 2), ref(2, 2);
  Rng rng_risk(20), rng_ref(20);
  for (int it = 0; it < 100; ++it) {
    risk = train_reinforce(m, risk, eta, cfg, rng_risk).params;

    // MaxEnt REINFORCE with the per-t mean of the tail as baseline.
    std::vector<Trajectory> batch(cfg.batch);
    for (auto& tr : batch) tr = sample_trajectory(m, ref, rng_ref);
    const int T = m.horizon();
    std::vector<std::vector<double>> tails(batch.size(), std::vector<double>(T));
    std::vector<double> mean_tail(T, 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double acc = batch[i].terminal_cost;
      for (int t = T - 1; t >= 0; --t) {
        acc += batch[i].stage_costs[t] + batch[i].log_probs[t];
        tails[i][t] = acc;
        mean_tail[t] += acc / batch.size();
      }
    }
    std::vector<double> grad(ref.logits.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (int t = 0; t < T; ++t) {
        const int x = batch[i].states[t];
        const auto pr = ref.probs(x);
        for (int u = 0; u < 2; ++u) {
          const double score = (u == batch[i].actions[t] ? 1.0 : 0.0) - pr[u];
          grad[x * 2 + u] += score * (tails[i][t] - mean_tail[t]) / batch.size();
        }
      }
    for (std::size_t j = 0; j < grad.size(); ++j) ref.logits[j] -= cfg.lr * grad[j];

    for (std::size_t j = 0; j < grad.size(); ++j) ASSERT_NEAR(risk.logits[j], ref.logits[j], 1e-3) << "iteration " << it;
  }
}

TEST(TrainReinforce, MeanReturnBaselineReducesVariance) {
  const auto m = small_mdp(21, 2, 2, 3);
  const double eta = 0.5;
  SoftmaxPolicyParams p(2, 2);
  Rng rng(22);
  int better = 0;
  const int iters = 100;
  for (int it = 0; it < iters; ++it) {
    std::vector<Trajectory> batch(64);
    for (auto& tr : batch) tr = sample_trajectory(m, p, rng);
    const auto means = mean_exponentiated_tails(batch, eta);
    const auto with = grad_estimate(batch, p, eta, [&](int t, int) { return means[t]; });
    const auto without = grad_estimate(batch, p, eta);
    better += with.per_sample_variance <= without.per_sample_variance;
    for (std::size_t j = 0; j < p.logits.size(); ++j) p.logits[j] -= 0.05 * with.grad[j];
  }
  EXPECT_GE(better, 0.8 * iters);
}

TEST(TrainReinforce, RejectsZeroEta) {
  Rng rng(23);
  EXPECT_THROW(train_reinforce(small_mdp(24), SoftmaxPolicyParams(2, 2), 0.0, {}, rng), InvalidRisk);
}
