#include "riskctl/core.hpp"

#include <cmath>
#include <sstream>

namespace riskctl {

std::string to_string(ProblemKind kind) { return kind == ProblemKind::LP ? "LP" : "Renyi"; }

void validate_risk_params(const RiskParams& params, ProblemKind kind) {
  if (!std::isfinite(params.eta)) throw InvalidRisk("eta must be finite");
  if (!std::isfinite(params.epsilon) || params.epsilon <= 0.0) throw InvalidRisk("epsilon must be > 0");
  if (params.eta == 0.0) return;  // MaxEnt limit, handled by the risk-neutral path
  if (kind == ProblemKind::LP) {
    if (!(params.eta > -1.0 / params.epsilon)) {
      std::ostringstream msg;
      msg << "LP problem requires eta > -1/epsilon (got eta=" << params.eta << ", epsilon=" << params.epsilon << ")";
      throw InvalidRisk(msg.str());
    }
  } else {
    if (params.eta == 1.0 / params.epsilon) {
      std::ostringstream msg;
      msg << "Renyi problem requires eta != 1/epsilon (got eta=" << params.eta << ", epsilon=" << params.epsilon << ")";
      throw InvalidRisk(msg.str());
    }
  }
}

namespace {

void check_probability_vector(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidModel(what + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " sums to " << sum << ", not 1";
    throw InvalidModel(msg.str());
  }
}

}  // namespace

FiniteHorizonMDP::FiniteHorizonMDP(int num_states, int num_actions, int horizon, std::vector<double> transition,
                                   std::vector<double> stage_cost, std::vector<double> terminal_cost,
                                   std::vector<double> initial_dist)
    : num_states_(num_states),
      num_actions_(num_actions),
      horizon_(horizon),
      transition_(std::move(transition)),
      stage_cost_(std::move(stage_cost)),
      terminal_cost_(std::move(terminal_cost)),
      initial_dist_(std::move(initial_dist)) {
  validate();
}

void FiniteHorizonMDP::validate() const {
  if (num_states_ <= 0 || num_actions_ <= 0 || horizon_ <= 0)
    throw InvalidModel("num_states, num_actions and horizon must be positive");
  const auto S = static_cast<std::size_t>(num_states_);
  const auto A = static_cast<std::size_t>(num_actions_);
  const auto T = static_cast<std::size_t>(horizon_);
  if (transition_.size() != T * S * A * S) throw InvalidModel("transition table has wrong size");
  if (stage_cost_.size() != T * S * A) throw InvalidModel("stage_cost table has wrong size");
  if (terminal_cost_.size() != S) throw InvalidModel("terminal_cost has wrong size");
  if (initial_dist_.size() != S) throw InvalidModel("initial_dist has wrong size");
  for (int t = 0; t < horizon_; ++t)
    for (int x = 0; x < num_states_; ++x)
      for (int u = 0; u < num_actions_; ++u) {
        std::ostringstream name;
        name << "transition row (t=" << t << ", x=" << x << ", u=" << u << ")";
        check_probability_vector(transition_row(t, x, u), name.str());
      }
  check_probability_vector(initial_dist_, "initial_dist");
  for (double c : stage_cost_)
    if (!std::isfinite(c)) throw InvalidModel("stage_cost has a non-finite entry");
  for (double c : terminal_cost_)
    if (!std::isfinite(c)) throw InvalidModel("terminal_cost has a non-finite entry");
}

bool FiniteHorizonMDP::is_deterministic() const {
  for (int t = 0; t < horizon_; ++t)
    for (int x = 0; x < num_states_; ++x)
      for (int u = 0; u < num_actions_; ++u) {
        int ones = 0;
        for (double v : transition_row(t, x, u)) {
          if (v == 1.0) {
            ++ones;
          } else if (v != 0.0) {
            return false;
          }
        }
        if (ones != 1) return false;
      }
  return true;
}

int FiniteHorizonMDP::successor(int t, int x, int u) const {
  const auto row = transition_row(t, x, u);
  int found = -1;
  for (std::size_t y = 0; y < row.size(); ++y) {
    if (row[y] == 1.0 && found < 0) {
      found = static_cast<int>(y);
    } else if (row[y] != 0.0) {
      found = -1;
      break;
    }
  }
  if (found < 0) {
    std::ostringstream msg;
    msg << "transition row (t=" << t << ", x=" << x << ", u=" << u << ") is not one-hot";
    throw NotDeterministic(msg.str());
  }
  return found;
}

TabularPolicy::TabularPolicy(int horizon, int num_states, int num_actions)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      probs_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0) {}

TabularPolicy::TabularPolicy(int horizon, int num_states, int num_actions, std::vector<double> probs)
    : horizon_(horizon), num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
  validate();
}

TabularPolicy TabularPolicy::uniform(int horizon, int num_states, int num_actions) {
  return TabularPolicy(horizon, num_states, num_actions,
                       std::vector<double>(static_cast<std::size_t>(horizon) * num_states * num_actions,
                                           1.0 / num_actions));
}

void TabularPolicy::validate() const {
  if (probs_.size() != static_cast<std::size_t>(horizon_) * num_states_ * num_actions_)
    throw InvalidModel("policy table has wrong size");
  for (int t = 0; t < horizon_; ++t)
    for (int x = 0; x < num_states_; ++x) {
      std::ostringstream name;
      name << "policy row (t=" << t << ", x=" << x << ")";
      check_probability_vector(row(t, x), name.str());
    }
}

ValueTables::ValueTables(int horizon, int num_states, int num_actions)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      v_(static_cast<std::size_t>(horizon + 1) * num_states, 0.0),
      q_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0),
      log_z_(static_cast<std::size_t>(horizon) * num_states, 0.0) {}

}  // namespace riskctl
