#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "riskctl/errors.hpp"
#include "riskctl/rng.hpp"

namespace riskctl {

// Tolerance used when validating probability vectors on construction.
inline constexpr double kProbabilityTolerance = 1e-12;

enum class ProblemKind { LP, Renyi };

std::string to_string(ProblemKind kind);

// Risk sensitivity eta and regularization weight epsilon.
//
// eta > 0 is risk-averse, eta < 0 risk-seeking. eta == 0 is accepted and means
// the MaxEnt limit; solvers route it to the risk-neutral recursion instead of
// dividing by eta.
struct RiskParams {
  double eta = 0.0;
  double epsilon = 1.0;

  bool is_maxent_limit() const { return eta == 0.0; }
};

// Throws InvalidRisk naming the violated constraint.
//   LP:    epsilon > 0, eta > -1/epsilon
//   Renyi: epsilon > 0, eta != 1/epsilon
void validate_risk_params(const RiskParams& params, ProblemKind kind);

// Tabular finite-horizon controlled Markov chain. Action space carries the
// counting measure, so the uniform action prior has mass num_actions.
//
// Storage is dense and row-major:
//   transition[((t * S + x) * A + u) * S + y] = p(y | x, u) at time t
//   stage_cost[(t * S + x) * A + u]           = c_t(x, u)
class FiniteHorizonMDP {
 public:
  FiniteHorizonMDP(int num_states, int num_actions, int horizon, std::vector<double> transition,
                   std::vector<double> stage_cost, std::vector<double> terminal_cost,
                   std::vector<double> initial_dist);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }

  double p(int t, int x, int u, int next) const { return transition_[row_offset(t, x, u) + next]; }
  std::span<const double> transition_row(int t, int x, int u) const {
    return {transition_.data() + row_offset(t, x, u), static_cast<std::size_t>(num_states_)};
  }
  double cost(int t, int x, int u) const { return stage_cost_[(static_cast<std::size_t>(t) * num_states_ + x) * num_actions_ + u]; }
  double terminal_cost(int x) const { return terminal_cost_[x]; }
  std::span<const double> initial_dist() const { return initial_dist_; }

  const std::vector<double>& transition_data() const { return transition_; }
  const std::vector<double>& stage_cost_data() const { return stage_cost_; }
  const std::vector<double>& terminal_cost_data() const { return terminal_cost_; }

  // True when every transition row is one-hot.
  bool is_deterministic() const;
  // Successor of a deterministic row; throws NotDeterministic otherwise.
  int successor(int t, int x, int u) const;

  // Re-checks all invariants; throws InvalidModel.
  void validate() const;

 private:
  std::size_t row_offset(int t, int x, int u) const {
    return ((static_cast<std::size_t>(t) * num_states_ + x) * num_actions_ + u) * num_states_;
  }

  int num_states_;
  int num_actions_;
  int horizon_;
  std::vector<double> transition_;
  std::vector<double> stage_cost_;
  std::vector<double> terminal_cost_;
  std::vector<double> initial_dist_;
};

// Time-varying tabular policy pi_t(u | x).
class TabularPolicy {
 public:
  TabularPolicy(int horizon, int num_states, int num_actions);
  TabularPolicy(int horizon, int num_states, int num_actions, std::vector<double> probs);

  static TabularPolicy uniform(int horizon, int num_states, int num_actions);

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  double operator()(int t, int x, int u) const { return probs_[index(t, x, u)]; }
  double& at(int t, int x, int u) { return probs_[index(t, x, u)]; }
  std::span<const double> row(int t, int x) const {
    return {probs_.data() + index(t, x, 0), static_cast<std::size_t>(num_actions_)};
  }
  std::span<double> row(int t, int x) { return {probs_.data() + index(t, x, 0), static_cast<std::size_t>(num_actions_)}; }
  const std::vector<double>& data() const { return probs_; }

  void validate() const;

 private:
  std::size_t index(int t, int x, int u) const {
    return (static_cast<std::size_t>(t) * num_states_ + x) * num_actions_ + u;
  }

  int horizon_;
  int num_states_;
  int num_actions_;
  std::vector<double> probs_;
};

// Backward-DP output. V has horizon+1 layers, Q and log_Z have horizon layers.
class ValueTables {
 public:
  ValueTables(int horizon, int num_states, int num_actions);

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  double V(int t, int x) const { return v_[static_cast<std::size_t>(t) * num_states_ + x]; }
  double& V(int t, int x) { return v_[static_cast<std::size_t>(t) * num_states_ + x]; }
  double Q(int t, int x, int u) const { return q_[(static_cast<std::size_t>(t) * num_states_ + x) * num_actions_ + u]; }
  double& Q(int t, int x, int u) { return q_[(static_cast<std::size_t>(t) * num_states_ + x) * num_actions_ + u]; }
  double log_Z(int t, int x) const { return log_z_[static_cast<std::size_t>(t) * num_states_ + x]; }
  double& log_Z(int t, int x) { return log_z_[static_cast<std::size_t>(t) * num_states_ + x]; }

  std::span<const double> q_row(int t, int x) const {
    return {q_.data() + (static_cast<std::size_t>(t) * num_states_ + x) * num_actions_,
            static_cast<std::size_t>(num_actions_)};
  }

 private:
  int horizon_;
  int num_states_;
  int num_actions_;
  std::vector<double> v_;
  std::vector<double> q_;
  std::vector<double> log_z_;
};

// One sampled episode of a tabular model.
struct Trajectory {
  std::vector<int> states;    // length T+1
  std::vector<int> actions;   // length T
  std::vector<double> stage_costs;
  std::vector<double> log_probs;
  // c_t + epsilon * log pi_t(u_t|x_t) as encountered while sampling.
  std::vector<double> realized_cost_terms;
  double terminal_cost = 0.0;

  int horizon() const { return static_cast<int>(actions.size()); }
};

}  // namespace riskctl
