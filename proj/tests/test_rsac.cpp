#include <gtest/gtest.h>

#include <cmath>

#include "reference_sac.hpp"
#include "rsac_fixtures.hpp"
#include "riskctl/rsac.hpp"

using namespace riskctl;
using rsacfix::Mat;

namespace {

RSACNetworks<double> tiny_nets(std::uint64_t seed, int obs = 3, int act = 1, int width = 8) {
  Rng rng(seed);
  return RSACNetworks<double>::init(obs, act, 2, width, rng);
}

double max_abs(const MLP<double>& m) {
  double d = 0.0;
  for (double v : m.flatten()) d = std::max(d, std::abs(v));
  return d;
}

// Inverse standard normal CDF by bisection on erfc.
double normal_quantile(double p) {
  double lo = -12.0, hi = 12.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

RSACConfig small_config(double eta, std::uint64_t seed) {
  RSACConfig c;
  c.eta = eta;
  c.seed = seed;
  c.hidden_units = 16;
  c.batch_size = 32;
  c.total_steps = 600;
  c.learning_starts = 100;
  c.eval_interval = 200;
  c.eval_episodes = 1;
  c.buffer_capacity = 1000;
  return c;
}

std::unique_ptr<Environment> pendulum() { return std::make_unique<PendulumEnv>(); }

}  // namespace

TEST(TEta, ZeroMapsToZero) {
  for (double eta : {-0.5, -1e-12, 0.0, 1e-12, 0.02, 3.0}) EXPECT_EQ(t_eta(0.0, eta), 0.0);
}

TEST(TEta, IdentityInTheLimit) {
  for (double v = -10.0; v <= 10.0; v += 0.25) EXPECT_NEAR(t_eta(v, 1e-12), v, 1e-9);
}

TEST(TEta, ScalarValue) {
  const long double ref = std::expm1(0.06L) / 0.02L;
  EXPECT_NEAR(t_eta(3.0, 0.02), static_cast<double>(ref), 1e-14);
}

TEST(TEta, StrictlyMonotoneOnGrid) {
  for (double eta : {-0.5, -0.02, -1e-10, 0.0, 1e-10, 0.02, 0.5}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10000; ++i) {
      const double v = -20.0 + 40.0 * i / 9999.0;
      const double t = t_eta(v, eta);
      ASSERT_GT(t, prev) << "eta=" << eta << " v=" << v;
      prev = t;
    }
  }
}

TEST(CriticGrad, ZeroResidualGivesZeroGradient) {
  auto nets = tiny_nets(1);
  Rng rng(2);
  auto batch = rsacfix::random_batch(rng, 3, 1, 8);
  batch.not_terminal.setOnes();
  Mat in(4, 8);
  in.topRows(3) = batch.obs;
  in.bottomRows(1) = batch.act;
  const Mat Q = nets.q1.forward(in);
  const Mat Vn = nets.v_target.forward(batch.next_obs);
  batch.cost = Q - 0.99 * Vn;
  for (double eta : {-0.02, 0.0, 0.02}) {
    auto g = nets.q1.zeros_like();
    critic_grad<double>(batch, nets.q1, nets.v_target, eta, 0.99, &g);
    EXPECT_LE(max_abs(g), 1e-13);
  }
}

TEST(CriticGrad, TerminalDropsBootstrap) {
  auto nets = tiny_nets(3);
  Rng rng(4);
  auto batch = rsacfix::random_batch(rng, 3, 1, 4);
  batch.not_terminal.setZero();
  auto other = nets;
  other.v_target = MLP<double>::init({3, 8, 8, 1}, rng);
  EXPECT_EQ(critic_grad<double>(batch, nets.q1, nets.v_target, 0.02, 0.99, nullptr),
            critic_grad<double>(batch, other.q1, other.v_target, 0.02, 0.99, nullptr));
}

TEST(ValueGrad, ZeroResidualGivesZeroGradient) {
  auto nets = tiny_nets(5);
  Rng rng(6);
  const auto batch = rsacfix::random_batch(rng, 3, 1, 1);
  const Mat xi = rsacfix::random_xi(rng, 1, 1);
  // At eta = 0 the output-bias gradient is the residual V - z; shift the bias by it.
  auto probe = nets.v.zeros_like();
  value_grad<double>(batch, nets.v, nets.q1, nets.q2, nets.policy, 0.0, 0.1, xi, &probe);
  nets.v.b.back()(0) -= probe.b.back()(0);
  for (double eta : {-0.02, 0.0, 0.02}) {
    auto g = nets.v.zeros_like();
    value_grad<double>(batch, nets.v, nets.q1, nets.q2, nets.policy, eta, 0.1, xi, &g);
    EXPECT_LE(max_abs(g), 1e-12);
  }
}

TEST(Gradients, FiniteDifferencesTinyNetwork) {
  // 8 transitions, 2-unit hidden layers.
  for (std::uint64_t seed : {7, 8, 9}) {
    const auto nets = tiny_nets(seed, 3, 1, 2);
    Rng rng(seed + 100);
    const auto batch = rsacfix::random_batch(rng, 3, 1, 8);
    const Mat xi = rsacfix::random_xi(rng, 1, 8);
    for (double eta : {-0.02, 0.0, 0.02}) {
      const auto e = rsacfix::check_gradients(nets, batch, xi, eta, 0.1, 0.99);
      EXPECT_LE(e.critic, 1e-4);
      EXPECT_LE(e.value, 1e-4);
      EXPECT_LE(e.actor, 1e-4);
    }
  }
}

TEST(Gradients, TinyEtaMatchesRiskNeutral) {
  const auto nets = tiny_nets(10, 3, 2, 8);
  Rng rng(11);
  const auto batch = rsacfix::random_batch(rng, 3, 2, 16);
  const Mat xi = rsacfix::random_xi(rng, 2, 16);
  auto diff = [](const MLP<double>& a, const MLP<double>& b) {
    const auto fa = a.flatten(), fb = b.flatten();
    double d = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) d = std::max(d, std::abs(fa[i] - fb[i]));
    return d;
  };
  RSACConfig c0, c1;
  c1.eta = 1e-8;
  const auto g0 = compute_gradients<double>(nets, batch, xi, c0);
  const auto g1 = compute_gradients<double>(nets, batch, xi, c1);
  EXPECT_LE(diff(g0.q1, g1.q1), 1e-5);
  EXPECT_LE(diff(g0.v, g1.v), 1e-5);
  EXPECT_LE(diff(g0.policy, g1.policy), 1e-5);
}

TEST(ActorGrad, SaturatedLogStdHasNoGradient) {
  auto nets = tiny_nets(12);
  nets.policy.b.back()(1) = 50.0;  // log_std output far above the clamp
  nets.policy.W.back().row(1).setZero();
  Rng rng(13);
  const auto batch = rsacfix::random_batch(rng, 3, 1, 8);
  const Mat xi = rsacfix::random_xi(rng, 1, 8);
  auto g = nets.policy.zeros_like();
  actor_grad<double>(batch, nets.policy, nets.q1, nets.q2, 0.02, 0.1, xi, &g);
  EXPECT_EQ(g.W.back().row(1).norm(), 0.0);
  EXPECT_EQ(g.b.back()(1), 0.0);
  EXPECT_GT(g.b.back()(0) * g.b.back()(0), 0.0);
}

TEST(ActorGrad, ScoreFunctionAgreesWithReparameterized) {
  // One state, one action dimension, critics equal to 0.7 a exactly on [-1, 1].
  auto nets = tiny_nets(14, 1, 1, 4);
  MLP<double> q({2, 4, 4, 1});
  q.W[0](0, 1) = 1.0;
  q.b[0](0) = 5.0;
  q.W[1](0, 0) = 1.0;
  q.W[2](0, 0) = 0.7;
  q.b[2](0) = -3.5;
  nets.q1 = q;
  nets.q2 = q;

  const int B = 40000;
  Batch<double> batch;
  batch.obs = Mat::Constant(1, B, 0.3);
  batch.act = Mat::Zero(1, B);
  batch.next_obs = batch.obs;
  batch.cost = Mat::Zero(1, B);
  batch.not_terminal = Mat::Ones(1, B);
  Mat xi(1, B);
  for (int k = 0; k < B; ++k) xi(0, k) = normal_quantile((k + 0.5) / B);

  for (double eta : {-0.02, 0.0, 0.02}) {
    auto gr = nets.policy.zeros_like();
    auto gs = nets.policy.zeros_like();
    actor_grad<double>(batch, nets.policy, q, q, eta, 0.1, xi, &gr, ActorEstimator::Reparameterized);
    actor_grad<double>(batch, nets.policy, q, q, eta, 0.1, xi, &gs, ActorEstimator::ScoreFunction);
    const auto fr = gr.flatten(), fs = gs.flatten();
    for (std::size_t i = 0; i < fr.size(); ++i) EXPECT_NEAR(fr[i], fs[i], 1e-3) << "eta=" << eta << " i=" << i;
  }
}

TEST(RsacUpdate, NonFiniteLeavesNetworksUntouched) {
  auto nets = tiny_nets(15);
  Rng rng(16);
  auto batch = rsacfix::random_batch(rng, 3, 1, 8);
  batch.cost *= 1e4;
  const Mat xi = rsacfix::random_xi(rng, 1, 8);
  RSACConfig c;
  c.eta = -5.0;
  c.override_eta_guard = true;
  auto opt = RSACOptimizers<double>::make(nets, c.lr);
  const auto before = nets.q1.flatten();
  EXPECT_THROW(rsac_update<double>(nets, opt, batch, xi, c), NonFinite);
  EXPECT_EQ(nets.q1.flatten(), before);
}

TEST(RsacUpdate, MatchesReferenceSacAtZeroEta) {
  auto nets = tiny_nets(17, 3, 1, 8);
  RSACConfig c;
  refsac::Trainer ref(nets, c);
  auto opt = RSACOptimizers<double>::make(nets, c.lr);
  Rng rng(18);
  for (int step = 0; step < 5; ++step) {
    const auto batch = rsacfix::random_batch(rng, 3, 1, 16);
    const Mat xi = rsacfix::random_xi(rng, 1, 16);
    rsac_update<double>(nets, opt, batch, xi, c);
    ref.step(refsac::unpack(batch), rsacfix::columns(xi));
  }
  EXPECT_LE(refsac::max_param_diff(ref.net.q1, nets.q1), 1e-6);
  EXPECT_LE(refsac::max_param_diff(ref.net.q2, nets.q2), 1e-6);
  EXPECT_LE(refsac::max_param_diff(ref.net.v, nets.v), 1e-6);
  EXPECT_LE(refsac::max_param_diff(ref.net.v_target, nets.v_target), 1e-6);
  EXPECT_LE(refsac::max_param_diff(ref.net.policy, nets.policy), 1e-6);
}

TEST(ReplayBuffer, DeterministicDistinctSampling) {
  ReplayBuffer buf(2, 1, 50);
  for (int i = 0; i < 80; ++i) {
    const double o[2] = {static_cast<double>(i), 0.0};
    const double a[1] = {0.0};
    buf.add(o, a, i, o, false);
  }
  EXPECT_EQ(buf.size(), 50);
  Rng a(19), b(19);
  const auto ba = buf.sample<double>(20, a), bb = buf.sample<double>(20, b);
  EXPECT_EQ(ba.obs, bb.obs);
  std::vector<double> seen(ba.cost.data(), ba.cost.data() + 20);
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::unique(seen.begin(), seen.end()), seen.end());
  EXPECT_GE(seen.front(), 30.0);  // the oldest 30 transitions were overwritten
  Rng c(19);
  EXPECT_THROW(buf.sample<double>(51, c), ConfigError);
}

TEST(RSACConfig, EtaGuard) {
  RSACConfig c;
  c.eta = 0.05;
  EXPECT_THROW(c.validate(), InvalidRisk);
  c.override_eta_guard = true;
  EXPECT_NO_THROW(c.validate());
  c.eta = -0.03;
  c.override_eta_guard = false;
  EXPECT_NO_THROW(c.validate());
}

TEST(RSACConfig, JsonRoundTripAndUnknownKeys) {
  RSACConfig c;
  c.eta = 0.01;
  c.actor_estimator = ActorEstimator::ScoreFunction;
  const auto back = rsac_config_from_json(to_json(c));
  EXPECT_EQ(back.eta, 0.01);
  EXPECT_EQ(back.actor_estimator, ActorEstimator::ScoreFunction);
  EXPECT_THROW(rsac_config_from_json(nlohmann::json{{"etaa", 0.1}}), ConfigError);
}

TEST(Train, SameSeedIdenticalLog) {
  const auto a = train(pendulum, 2.0, small_config(0.02, 3));
  const auto b = train(pendulum, 2.0, small_config(0.02, 3));
  ASSERT_EQ(a.log.rows.size(), b.log.rows.size());
  ASSERT_EQ(a.log.rows.size(), 3u);
  for (std::size_t r = 0; r < a.log.rows.size(); ++r)
    for (std::size_t j = 0; j + 1 < a.log.columns.size(); ++j) EXPECT_EQ(a.log.rows[r][j], b.log.rows[r][j]);
  EXPECT_EQ(a.agent.policy.flatten(), b.agent.policy.flatten());
  const auto c = train(pendulum, 2.0, small_config(0.02, 4));
  EXPECT_NE(a.agent.policy.flatten(), c.agent.policy.flatten());
}

TEST(Train, GuardRejectsLargeEta) { EXPECT_THROW(train(pendulum, 2.0, small_config(0.05, 0)), InvalidRisk); }

TEST(Checkpoint, RoundTrip) {
  const auto r = train(pendulum, 2.0, small_config(0.0, 5));
  const auto doc = checkpoint_to_json(r.agent, small_config(0.0, 5), r.steps_completed);
  const auto back = checkpoint_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(back.step, 600);
  EXPECT_EQ(back.agent.policy.flatten(), r.agent.policy.flatten());
  EXPECT_EQ(back.agent.v_target.flatten(), r.agent.v_target.flatten());
  EXPECT_EQ(back.config.seed, 5u);
}

TEST(Robustness, OneRowPerLengthAndTrial) {
  Rng init(20);
  const auto policy = MLP<Real>::init({3, 8, 2}, init);
  Rng rng(21);
  const auto rep = evaluate_robustness(policy, {}, {1.0, 1.25, 1.5}, 3, 2, rng);
  EXPECT_EQ(rep.rows.size(), 9u);
  ASSERT_EQ(rep.summary.size(), 3u);
  for (const auto& s : rep.summary) {
    EXPECT_EQ(s.episode_costs.size(), 6u);
    EXPECT_LE(s.min, s.mean);
    EXPECT_GE(s.max, s.mean);
  }
}

TEST(Robustness, TrainingLengthMatchesEvaluation) {
  Rng init(22);
  const auto policy = MLP<Real>::init({3, 8, 2}, init);
  Rng a(23), b(23);
  PendulumEnv env;
  const auto direct = evaluate_policy(policy, env, 50, 2.0, a);
  const auto rep = evaluate_robustness(policy, {}, {1.0}, 1, 50, b);
  double var = 0.0;
  for (double c : direct.episode_costs) var += (c - direct.mean) * (c - direct.mean);
  const double se = std::sqrt(var / 49.0 / 50.0);
  EXPECT_LE(std::abs(rep.summary[0].mean - direct.mean), 4.0 * std::sqrt(2.0) * se);
}
