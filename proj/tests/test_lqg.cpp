#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "riskctl/errors.hpp"
#include "riskctl/lqg.hpp"

using namespace riskctl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd s(double v) { return MatrixXd::Constant(1, 1, v); }

LQGModel scalar_model(int T = 2, double QT = 1.0) {
  return LQGModel::time_invariant(T, s(1), s(1), s(1), s(1), s(1), s(QT), VectorXd::Zero(1), s(0));
}

LQGModel planar_model() {
  MatrixXd A(2, 2), B(2, 1);
  A << 1.0, 0.1, 0.0, 1.0;
  B << 0.0, 0.1;
  return LQGModel::time_invariant(6, A, B, 0.05 * MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2),
                                  0.5 * MatrixXd::Identity(1, 1), 2.0 * MatrixXd::Identity(2, 2), VectorXd::Ones(2),
                                  MatrixXd::Zero(2, 2));
}

}  // namespace

TEST(Riccati, TerminalEqualsQT) {
  const auto m = planar_model();
  for (double eta : {-0.3, 0.0, 0.3}) EXPECT_EQ(solve_riccati(m, eta).Pi.back(), m.Q_T);
}

TEST(Riccati, RiskNeutralTextbookGain) {
  const auto sol = solve_riccati(scalar_model(), 0.0);
  EXPECT_DOUBLE_EQ(sol.Pi[1](0, 0), 1.5);
  EXPECT_DOUBLE_EQ(sol.K[1](0, 0), 0.5);
}

TEST(Riccati, MatchesScalarOracle) {
  for (double eta : {0.1, -0.1, 0.3}) {
    const auto sol = solve_riccati(scalar_model(), eta);
    const auto ref = oracle::scalar_riccati(1, 1, 1, 1, 1, 1, 2, eta);
    for (int t = 0; t <= 2; ++t) EXPECT_NEAR(sol.Pi[t](0, 0), ref.Pi[t], 1e-12);
    for (int t = 0; t < 2; ++t) {
      EXPECT_NEAR(sol.K[t](0, 0), ref.K[t], 1e-12);
      EXPECT_NEAR(sol.S[t](0, 0), ref.S[t], 1e-12);
    }
  }
}

TEST(Riccati, NeuroticBreakdown) {
  try {
    solve_riccati(scalar_model(2, 20.0), 0.1);
    FAIL() << "expected NeuroticBreakdown";
  } catch (const NeuroticBreakdown& e) {
    EXPECT_EQ(e.t(), 1);
  }
}

TEST(Riccati, SymmetricOutputs) {
  const auto sol = solve_riccati(planar_model(), 0.4);
  for (const auto& P : sol.Pi) EXPECT_LE((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  for (const auto& S : sol.S) EXPECT_LE((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Riccati, ContinuousAtZero) {
  const auto m = planar_model();
  const auto a = solve_riccati(m, 1e-8), b = solve_riccati(m, 0.0);
  for (std::size_t t = 0; t < a.Pi.size(); ++t) EXPECT_LE((a.Pi[t] - b.Pi[t]).norm(), 1e-6);
}

TEST(Riccati, RejectsIndefiniteCost) {
  auto m = scalar_model();
  m.R[0] = s(-1.0);
  EXPECT_THROW(solve_riccati(m, 0.0), InvalidModel);
}

TEST(Simulate, ZeroModelGivesZeroTrajectory) {
  auto m = LQGModel::time_invariant(3, s(1), s(1), s(0), s(1), s(1), s(1), VectorXd::Zero(1), s(0));
  RiccatiSolution sol;
  sol.Pi.assign(4, s(0));
  sol.K.assign(3, s(0));
  sol.S.assign(3, s(0));
  Rng rng(1);
  for (const auto& tr : simulate(m, sol, 5, rng)) {
    for (const auto& x : tr.states) EXPECT_EQ(x.norm(), 0.0);
    for (const auto& u : tr.actions) EXPECT_EQ(u.norm(), 0.0);
  }
}

TEST(Simulate, SeedReproducible) {
  const auto m = planar_model();
  const auto sol = solve_riccati(m, 0.2);
  Rng a(9), b(9);
  const auto ra = simulate(m, sol, 3, a), rb = simulate(m, sol, 3, b);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(ra[i].cost, rb[i].cost);
    EXPECT_EQ(ra[i].states.back(), rb[i].states.back());
  }
}

TEST(Simulate, ActionCovarianceMatchesS0) {
  const auto m = planar_model();
  const auto sol = solve_riccati(m, 0.2);
  Rng rng(10);
  const int N = 100000;
  const auto rs = simulate(m, sol, N, rng);
  const VectorXd mean = -sol.K[0] * m.x0_mean;
  MatrixXd cov = MatrixXd::Zero(1, 1);
  for (const auto& r : rs) cov += (r.actions[0] - mean) * (r.actions[0] - mean).transpose();
  cov /= N;
  EXPECT_LE((cov - sol.S[0]).norm() / sol.S[0].norm(), 0.05);
}

TEST(McObjective, DegenerateModelHandFormula) {
  const int T = 4;
  MatrixXd R(2, 2);
  R << 2.0, 0.3, 0.3, 1.0;
  const auto m = LQGModel::time_invariant(T, MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2),
                                          1e-8 * MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), R,
                                          MatrixXd::Identity(2, 2), VectorXd::Zero(2), MatrixXd::Zero(2, 2));
  const double per_step = -std::log(2.0 * std::numbers::pi) + 0.5 * std::log(R.determinant());
  for (double eta : {0.0, 0.5}) {
    const auto sol = solve_riccati(m, eta);
    Rng rng(11);
    EXPECT_NEAR(mc_objective(m, sol, eta, 2000, rng), T * per_step, 1e-4);
  }
}

TEST(McObjective, GainPerturbationIsWorse) {
  const auto m = planar_model();
  for (double eta : {0.0, 0.3}) {
    const auto sol = solve_riccati(m, eta);
    auto bumped = sol;
    bumped.K[0] *= 1.2;
    Rng a(12), b(12);
    EXPECT_LT(mc_objective(m, sol, eta, 100000, a), mc_objective(m, bumped, eta, 100000, b));
  }
}

TEST(LqgIo, RoundTrip) {
  const auto m = planar_model();
  const auto back = lqg_from_json(to_json(m));
  EXPECT_EQ(back.horizon, m.horizon);
  EXPECT_EQ(back.A[3], m.A[3]);
  EXPECT_EQ(back.Q_T, m.Q_T);
}
