#include "riskctl/tabular.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "riskctl/duality.hpp"
#include "riskctl/numerics.hpp"

namespace riskctl {

std::string to_string(SolveKind kind) {
  switch (kind) {
    case SolveKind::LP: return "LP";
    case SolveKind::Renyi: return "Renyi";
    case SolveKind::MaxEnt: return "MaxEnt";
    case SolveKind::CaIPosterior: return "CaIPosterior";
  }
  return "?";
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::LP: return "LP";
    case ObjectiveKind::Renyi: return "Renyi";
    case ObjectiveKind::MaxEnt: return "MaxEnt";
  }
  return "?";
}

namespace {

enum class Aggregation { Softmin, Renyi };
enum class Expectation { Risk, Neutral };

struct Recursion {
  double eta = 0.0;
  double epsilon = 1.0;
  double cost_shift = 0.0;
  Expectation expectation = Expectation::Risk;
  Aggregation aggregation = Aggregation::Softmin;
};

void fill_gibbs_row(std::span<const double> q, double epsilon, std::span<double> out, double& log_z) {
  std::vector<double> a(q.size());
  for (std::size_t u = 0; u < q.size(); ++u) a[u] = -q[u] / epsilon;
  log_z = log_sum_exp(a);
  double sum = 0.0;
  for (std::size_t u = 0; u < q.size(); ++u) {
    out[u] = std::exp(a[u] - log_z);
    sum += out[u];
  }
  for (auto& p : out) p /= sum;
}

SolveResult run_recursion(const FiniteHorizonMDP& mdp, const Recursion& r, SolveKind kind, RiskParams params) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  const int T = mdp.horizon();
  ValueTables values(T, S, A);
  TabularPolicy policy(T, S, A);
  for (int x = 0; x < S; ++x) values.V(T, x) = mdp.terminal_cost(x);

  std::vector<double> scaled_next(S);
  std::vector<double> neg_q(A);
  for (int t = T - 1; t >= 0; --t) {
    if (r.expectation == Expectation::Risk)
      for (int y = 0; y < S; ++y) scaled_next[y] = r.eta * values.V(t + 1, y);
    for (int x = 0; x < S; ++x) {
      for (int u = 0; u < A; ++u) {
        const auto row = mdp.transition_row(t, x, u);
        double next = 0.0;
        if (r.expectation == Expectation::Risk) {
          next = weighted_log_sum_exp(row, scaled_next) / r.eta;
        } else {
          for (int y = 0; y < S; ++y)
            if (row[y] > 0.0) next += row[y] * values.V(t + 1, y);
        }
        const double q = mdp.cost(t, x, u) + r.cost_shift + next;
        if (!std::isfinite(q)) throw Overflow(t, x);
        values.Q(t, x, u) = q;
      }
      const auto q = values.q_row(t, x);
      fill_gibbs_row(q, r.epsilon, policy.row(t, x), values.log_Z(t, x));
      double v = 0.0;
      if (r.aggregation == Aggregation::Softmin) {
        v = -r.epsilon * values.log_Z(t, x);
      } else {
        const double kappa = 1.0 / r.epsilon - r.eta;
        for (int u = 0; u < A; ++u) neg_q[u] = -kappa * q[u];
        v = -log_sum_exp(neg_q) / kappa;
      }
      if (!std::isfinite(v)) throw Overflow(t, x);
      values.V(t, x) = v;
    }
  }
  policy.validate();
  const double agg_eta = r.expectation == Expectation::Risk ? r.eta : 0.0;
  const double init = aggregate_initial_value(mdp, values, agg_eta);
  return SolveResult{std::move(values), std::move(policy), kind, params, init};
}

}  // namespace

double aggregate_initial_value(const FiniteHorizonMDP& mdp, const ValueTables& values, double eta) {
  const auto init = mdp.initial_dist();
  const int S = mdp.num_states();
  if (eta == 0.0) {
    double v = 0.0;
    for (int x = 0; x < S; ++x)
      if (init[x] > 0.0) v += init[x] * values.V(0, x);
    return v;
  }
  std::vector<double> a(S);
  for (int x = 0; x < S; ++x) a[x] = eta * values.V(0, x);
  return weighted_log_sum_exp(init, a) / eta;
}

namespace detail {

SolveResult lp_recursion_unchecked(const FiniteHorizonMDP& mdp, double eta, double epsilon, double cost_shift) {
  Recursion r;
  r.eta = eta;
  r.epsilon = epsilon;
  r.cost_shift = cost_shift;
  return run_recursion(mdp, r, SolveKind::LP, RiskParams{eta, epsilon});
}

}  // namespace detail

SolveResult solve_maxent(const FiniteHorizonMDP& mdp, double epsilon) {
  if (!std::isfinite(epsilon) || epsilon <= 0.0) throw InvalidRisk("epsilon must be > 0");
  Recursion r;
  r.epsilon = epsilon;
  r.expectation = Expectation::Neutral;
  return run_recursion(mdp, r, SolveKind::MaxEnt, RiskParams{0.0, epsilon});
}

SolveResult solve_lp(const FiniteHorizonMDP& mdp, const RiskParams& params) {
  validate_risk_params(params, ProblemKind::LP);
  if (params.is_maxent_limit()) return solve_maxent(mdp, params.epsilon);
  return detail::lp_recursion_unchecked(mdp, params.eta, params.epsilon, 0.0);
}

SolveResult solve_renyi(const FiniteHorizonMDP& mdp, const RiskParams& params) {
  validate_risk_params(params, ProblemKind::Renyi);
  if (params.is_maxent_limit()) return solve_maxent(mdp, params.epsilon);
  Recursion r;
  r.eta = params.eta;
  r.epsilon = params.epsilon;
  r.aggregation = Aggregation::Renyi;
  return run_recursion(mdp, r, SolveKind::Renyi, params);
}

SolveResult solve_cai_posterior(const FiniteHorizonMDP& mdp) {
  Recursion r;
  r.eta = -1.0;
  r.epsilon = 1.0;
  r.cost_shift = std::log(static_cast<double>(mdp.num_actions()));
  return run_recursion(mdp, r, SolveKind::CaIPosterior, RiskParams{-1.0, 1.0});
}

std::uint64_t trajectory_count(const FiniteHorizonMDP& mdp) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t branch = static_cast<std::uint64_t>(mdp.num_states()) * mdp.num_actions();
  std::uint64_t n = static_cast<std::uint64_t>(mdp.num_states());
  for (int t = 0; t < mdp.horizon(); ++t) {
    if (n > kMax / branch) return kMax;
    n *= branch;
  }
  return n;
}

namespace {

struct Enumerator {
  const FiniteHorizonMDP& mdp;
  const TabularPolicy& policy;
  double eta;
  double epsilon;
  ObjectiveKind kind;
  // Per (t, x) regularizer for the Renyi objective; unused otherwise.
  std::vector<double> state_term;
  LogSumExpAccumulator risk;
  double neutral = 0.0;
  bool risk_mode;

  void visit(int t, int x, double log_prob, double phi) {
    const int T = mdp.horizon();
    if (t == T) {
      const double total = phi + mdp.terminal_cost(x);
      if (risk_mode) {
        risk.add(log_prob + eta * total);
      } else {
        neutral += std::exp(log_prob) * total;
      }
      return;
    }
    const int A = mdp.num_actions();
    const int S = mdp.num_states();
    for (int u = 0; u < A; ++u) {
      const double pu = policy(t, x, u);
      if (pu <= 0.0) continue;
      double step = mdp.cost(t, x, u);
      if (kind == ObjectiveKind::Renyi) {
        step += state_term[static_cast<std::size_t>(t) * S + x];
      } else {
        step += epsilon * std::log(pu);
      }
      const auto row = mdp.transition_row(t, x, u);
      const double lp_u = log_prob + std::log(pu);
      for (int y = 0; y < S; ++y)
        if (row[y] > 0.0) visit(t + 1, y, lp_u + std::log(row[y]), phi + step);
    }
  }
};

}  // namespace

double evaluate_objective_exact(const FiniteHorizonMDP& mdp, const TabularPolicy& policy, const RiskParams& params,
                                ObjectiveKind kind, const ObjectiveOptions& options) {
  if (policy.horizon() != mdp.horizon() || policy.num_states() != mdp.num_states() ||
      policy.num_actions() != mdp.num_actions())
    throw InvalidModel("policy shape does not match the MDP");
  if (trajectory_count(mdp) > options.path_budget)
    throw TooLarge("trajectory enumeration exceeds the path budget of " + std::to_string(options.path_budget));
  if (kind != ObjectiveKind::MaxEnt)
    validate_risk_params(params, kind == ObjectiveKind::LP ? ProblemKind::LP : ProblemKind::Renyi);

  const bool risk_mode = kind != ObjectiveKind::MaxEnt && params.eta != 0.0;
  Enumerator e{mdp, policy, params.eta, params.epsilon, kind, {}, {}, 0.0, risk_mode};
  if (kind == ObjectiveKind::Renyi) {
    const int S = mdp.num_states();
    const double alpha = 1.0 - params.epsilon * params.eta;
    e.state_term.resize(static_cast<std::size_t>(mdp.horizon()) * S);
    for (int t = 0; t < mdp.horizon(); ++t)
      for (int x = 0; x < S; ++x) e.state_term[static_cast<std::size_t>(t) * S + x] = -params.epsilon * renyi_entropy(policy.row(t, x), alpha);
  }
  const auto init = mdp.initial_dist();
  for (int x = 0; x < mdp.num_states(); ++x)
    if (init[x] > 0.0) e.visit(0, x, std::log(init[x]), 0.0);
  return risk_mode ? e.risk.value() / params.eta : e.neutral;
}

std::vector<std::vector<double>> linearized_bellman(const FiniteHorizonMDP& mdp, double epsilon) {
  if (!std::isfinite(epsilon) || epsilon <= 0.0) throw InvalidRisk("epsilon must be > 0");
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  const int T = mdp.horizon();
  std::vector<std::vector<double>> E(T + 1, std::vector<double>(S));
  for (int x = 0; x < S; ++x) E[T][x] = std::exp(-mdp.terminal_cost(x) / epsilon);
  for (int t = T - 1; t >= 0; --t)
    for (int x = 0; x < S; ++x) {
      double sum = 0.0;
      for (int u = 0; u < A; ++u) sum += std::exp(-mdp.cost(t, x, u) / epsilon) * E[t + 1][mdp.successor(t, x, u)];
      E[t][x] = sum;
    }
  return E;
}

}  // namespace riskctl
