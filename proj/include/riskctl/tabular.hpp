#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskctl/core.hpp"

namespace riskctl {

enum class SolveKind { LP, Renyi, MaxEnt, CaIPosterior };
enum class ObjectiveKind { LP, Renyi, MaxEnt };

std::string to_string(SolveKind kind);
std::string to_string(ObjectiveKind kind);

struct SolveResult {
  ValueTables values;
  TabularPolicy policy;
  SolveKind kind;
  RiskParams params;
  // V_0 aggregated over the initial distribution with the same certainty
  // equivalent the objective uses: (1/eta) log E exp(eta V_0), or E V_0 when eta == 0.
  double initial_value = 0.0;
};

// LP-regularized risk-sensitive control. eta == 0 is routed to solve_maxent.
SolveResult solve_lp(const FiniteHorizonMDP& mdp, const RiskParams& params);

// Renyi-entropy-regularized risk-sensitive control. eta == 0 is routed to solve_maxent.
SolveResult solve_renyi(const FiniteHorizonMDP& mdp, const RiskParams& params);

// Risk-neutral recursion Q = c + E[V'].
SolveResult solve_maxent(const FiniteHorizonMDP& mdp, double epsilon = 1.0);

// Posterior recursion of the inference formulation. Values carry the
// log(num_actions) per-stage shift of the uniform action prior, so V_t is
// offset by (T - t) log(num_actions) from the eta = -1 LP recursion. The
// policy is unaffected by the shift.
SolveResult solve_cai_posterior(const FiniteHorizonMDP& mdp);

// V_0 aggregated over initial_dist as described on SolveResult::initial_value.
double aggregate_initial_value(const FiniteHorizonMDP& mdp, const ValueTables& values, double eta);

struct ObjectiveOptions {
  std::uint64_t path_budget = 10'000'000;
};

// Exact objective of an arbitrary policy by enumerating every trajectory.
//   LP:     (1/eta) log E exp(eta * (c_T + sum_t c_t + eps log pi_t))
//   Renyi:  (1/eta) log E exp(eta * (c_T + sum_t c_t - eps H_{1-eps*eta}(pi_t(.|x_t))))
//   MaxEnt: E[c_T + sum_t c_t + eps log pi_t]
// eta == 0 under LP or Renyi returns the expectation of the respective Phi.
// Throws TooLarge when S (A S)^T exceeds the path budget.
double evaluate_objective_exact(const FiniteHorizonMDP& mdp, const TabularPolicy& policy, const RiskParams& params,
                                ObjectiveKind kind, const ObjectiveOptions& options = {});

std::uint64_t trajectory_count(const FiniteHorizonMDP& mdp);

// E_t(x) = exp(-V_t(x) / epsilon) for deterministic dynamics, computed by the
// linear recursion E_t(x) = sum_u exp(-c_t(x,u) / epsilon) E_{t+1}(f_t(x,u)).
// Indexed [t][x], t in [0, T]. Throws NotDeterministic on stochastic rows.
std::vector<std::vector<double>> linearized_bellman(const FiniteHorizonMDP& mdp, double epsilon = 1.0);

namespace detail {

// LP backward recursion without risk-parameter validation, with an extra
// constant added to every stage cost. Used for the eta = -1 posterior.
SolveResult lp_recursion_unchecked(const FiniteHorizonMDP& mdp, double eta, double epsilon, double cost_shift);

}  // namespace detail

}  // namespace riskctl
