#pragma once

#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "riskctl/rng.hpp"

namespace riskctl {

// Time-varying linear-Gaussian system
//   x_{t+1} ~ N(A_t x_t + B_t u_t, Sigma_t),  c_t = (x'Q_t x + u'R_t u) / 2,  c_T = x'Q_T x / 2.
// A plain aggregate; validate() is run by solve_riccati and the JSON loader.
struct LQGModel {
  int horizon = 0;
  std::vector<Eigen::MatrixXd> A, B, Sigma, Q, R;  // one per t in [0, T)
  Eigen::MatrixXd Q_T;
  Eigen::VectorXd x0_mean;
  Eigen::MatrixXd x0_cov;  // positive semidefinite; zero pins x_0 to the mean

  int state_dim() const { return static_cast<int>(Q_T.rows()); }
  int control_dim() const { return R.empty() ? 0 : static_cast<int>(R.front().rows()); }

  // Throws InvalidModel on dimension mismatch or when Sigma_t, Q_t, Q_T, R_t are
  // not symmetric positive definite.
  void validate() const;

  static LQGModel time_invariant(int horizon, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                 const Eigen::MatrixXd& Q_T, const Eigen::VectorXd& x0_mean,
                                 const Eigen::MatrixXd& x0_cov);
};

// Optimal policy u ~ N(-K_t x, S_t).
struct RiccatiSolution {
  double eta = 0.0;
  std::vector<Eigen::MatrixXd> Pi;  // t in [0, T]
  std::vector<Eigen::MatrixXd> K;   // t in [0, T)
  std::vector<Eigen::MatrixXd> S;   // t in [0, T)
};

// Risk-sensitive Riccati recursion with feasibility check at every step.
// Throws NeuroticBreakdown(t) when Sigma_t^{-1} - eta Pi_{t+1} is not positive
// definite and SingularMatrix(t) when a factorization has rcond below 1e-12.
RiccatiSolution solve_riccati(const LQGModel& model, double eta);

struct LQGTrajectory {
  std::vector<Eigen::VectorXd> states;   // T+1
  std::vector<Eigen::VectorXd> actions;  // T
  double cost = 0.0;                     // quadratic costs only
  double log_prob = 0.0;                 // sum_t log pi_t(u_t | x_t)
};

// Rollouts of the Gaussian policy. Does not re-validate the model, so
// degenerate (zero) covariances are accepted here.
std::vector<LQGTrajectory> simulate(const LQGModel& model, const RiccatiSolution& sol, int num_rollouts, Rng& rng);

struct MCEstimate {
  double value = 0.0;
  // Delta-method standard error of the log-mean-exp estimator.
  double std_error = 0.0;
  int num_rollouts = 0;
};

// (1/eta) log mean exp(eta Phi) over rollouts, Phi = quadratic costs + sum_t log pi_t.
// eta == 0 gives the sample mean of Phi.
MCEstimate mc_objective_estimate(const LQGModel& model, const RiccatiSolution& sol, double eta, int num_rollouts,
                                 Rng& rng);
double mc_objective(const LQGModel& model, const RiccatiSolution& sol, double eta, int num_rollouts, Rng& rng);

nlohmann::json to_json(const LQGModel& model);
nlohmann::json to_json(const RiccatiSolution& sol);
// Matrices are row-major nested arrays. A, B, Sigma, Q, R may be a single
// matrix (time-invariant) or a list of T matrices.
LQGModel lqg_from_json(const nlohmann::json& doc);

}  // namespace riskctl
