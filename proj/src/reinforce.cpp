#include "riskctl/reinforce.hpp"

#include <chrono>
#include <cmath>

#include "riskctl/numerics.hpp"

namespace riskctl {

std::vector<double> SoftmaxPolicyParams::log_probs(int x) const {
  std::span<const double> row(logits.data() + static_cast<std::size_t>(x) * num_actions, num_actions);
  const double lse = log_sum_exp(row);
  std::vector<double> out(num_actions);
  for (int u = 0; u < num_actions; ++u) out[u] = row[u] - lse;
  return out;
}

std::vector<double> SoftmaxPolicyParams::probs(int x) const {
  auto out = log_probs(x);
  for (auto& v : out) v = std::exp(v);
  return out;
}

TabularPolicy SoftmaxPolicyParams::as_tabular(int horizon) const {
  std::vector<double> table;
  table.reserve(static_cast<std::size_t>(horizon) * logits.size());
  for (int t = 0; t < horizon; ++t)
    for (int x = 0; x < num_states; ++x) {
      auto p = probs(x);
      double sum = 0.0;
      for (double v : p) sum += v;
      for (double v : p) table.push_back(v / sum);
    }
  return TabularPolicy(horizon, num_states, num_actions, std::move(table));
}

Trajectory sample_trajectory(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& params, Rng& rng) {
  const int T = mdp.horizon();
  Trajectory tr;
  tr.states.reserve(T + 1);
  tr.actions.reserve(T);
  int x = rng.categorical(mdp.initial_dist());
  tr.states.push_back(x);
  for (int t = 0; t < T; ++t) {
    const auto lp = params.log_probs(x);
    std::vector<double> p(lp.size());
    for (std::size_t u = 0; u < lp.size(); ++u) p[u] = std::exp(lp[u]);
    const int u = rng.categorical(p);
    const double c = mdp.cost(t, x, u);
    tr.actions.push_back(u);
    tr.stage_costs.push_back(c);
    tr.log_probs.push_back(lp[u]);
    tr.realized_cost_terms.push_back(c + lp[u]);
    x = rng.categorical(mdp.transition_row(t, x, u));
    tr.states.push_back(x);
  }
  tr.terminal_cost = mdp.terminal_cost(x);
  return tr;
}

namespace {

// eta * tail_t for every t, accumulated backward once.
std::vector<double> scaled_tails(const Trajectory& tr, double eta) {
  const int T = tr.horizon();
  std::vector<double> out(T);
  double tail = tr.terminal_cost;
  for (int t = T - 1; t >= 0; --t) {
    tail += tr.stage_costs[t] + tr.log_probs[t];
    out[t] = eta * tail;
  }
  return out;
}

// Adds scale * (eta+1)/eta * sum_t grad log pi * exp(eta head_t) (exp(eta tail_t) - b) into out.
// The exponential utility is multiplicative, so the past enters as the weight
// exp(eta head_t) rather than dropping out.
void add_term(const Trajectory& tr, const SoftmaxPolicyParams& params, double eta, const Baseline& baseline,
              double scale, std::vector<double>& out) {
  const auto tails = scaled_tails(tr, eta);
  const double factor = scale * (eta + 1.0) / eta;
  const int A = params.num_actions;
  double head = 0.0;
  for (int t = 0; t < tr.horizon(); ++t) {
    const int x = tr.states[t];
    const double b = baseline ? baseline(t, x) : 0.0;
    const double w = factor * std::exp(eta * head) * (std::exp(tails[t]) - b);
    const auto p = params.probs(x);
    double* row = out.data() + static_cast<std::size_t>(x) * A;
    for (int u = 0; u < A; ++u) row[u] -= w * p[u];
    row[tr.actions[t]] += w;
    head += tr.stage_costs[t] + tr.log_probs[t];
  }
}

template <class Leaf>
void enumerate(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& params, const ObjectiveOptions& options,
               Leaf&& leaf) {
  if (trajectory_count(mdp) > options.path_budget)
    throw TooLarge("trajectory enumeration exceeds the path budget of " + std::to_string(options.path_budget));
  const int T = mdp.horizon();
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  std::vector<std::vector<double>> logp(S);
  for (int x = 0; x < S; ++x) logp[x] = params.log_probs(x);
  Trajectory tr;
  tr.states.assign(T + 1, 0);
  tr.actions.assign(T, 0);
  tr.stage_costs.assign(T, 0.0);
  tr.log_probs.assign(T, 0.0);
  tr.realized_cost_terms.assign(T, 0.0);
  auto visit = [&](auto&& self, int t, int x, double log_weight) -> void {
    tr.states[t] = x;
    if (t == T) {
      tr.terminal_cost = mdp.terminal_cost(x);
      leaf(tr, std::exp(log_weight));
      return;
    }
    for (int u = 0; u < A; ++u) {
      tr.actions[t] = u;
      tr.stage_costs[t] = mdp.cost(t, x, u);
      tr.log_probs[t] = logp[x][u];
      tr.realized_cost_terms[t] = tr.stage_costs[t] + logp[x][u];
      const auto row = mdp.transition_row(t, x, u);
      for (int y = 0; y < S; ++y)
        if (row[y] > 0.0) self(self, t + 1, y, log_weight + logp[x][u] + std::log(row[y]));
    }
  };
  const auto init = mdp.initial_dist();
  for (int x = 0; x < S; ++x)
    if (init[x] > 0.0) visit(visit, 0, x, std::log(init[x]));
}

}  // namespace

GradEstimate grad_estimate(std::span<const Trajectory> batch, const SoftmaxPolicyParams& params, double eta,
                           const Baseline& baseline) {
  if (eta == 0.0) throw InvalidRisk("grad_estimate requires eta != 0");
  const std::size_t dim = params.logits.size();
  GradEstimate est;
  est.num_samples = static_cast<int>(batch.size());
  est.grad.assign(dim, 0.0);
  est.coordinate_variance.assign(dim, 0.0);
  if (batch.empty()) return est;
  const double n = static_cast<double>(batch.size());
  std::vector<std::vector<double>> terms(batch.size(), std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < batch.size(); ++i) add_term(batch[i], params, eta, baseline, 1.0, terms[i]);
  for (const auto& g : terms)
    for (std::size_t j = 0; j < dim; ++j) est.grad[j] += g[j];
  for (auto& v : est.grad) v /= n;
  if (batch.size() > 1) {
    for (const auto& g : terms)
      for (std::size_t j = 0; j < dim; ++j) est.coordinate_variance[j] += (g[j] - est.grad[j]) * (g[j] - est.grad[j]);
    for (auto& v : est.coordinate_variance) v /= n - 1.0;
  }
  for (double v : est.coordinate_variance) est.per_sample_variance += v;
  est.per_sample_variance /= static_cast<double>(dim);
  return est;
}

std::vector<double> exact_gradient_oracle(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& params, double eta,
                                          const Baseline& baseline, const ObjectiveOptions& options) {
  if (eta == 0.0) throw InvalidRisk("exact_gradient_oracle requires eta != 0");
  std::vector<double> grad(params.logits.size(), 0.0);
  enumerate(mdp, params, options,
            [&](const Trajectory& tr, double weight) { add_term(tr, params, eta, baseline, weight, grad); });
  return grad;
}

double exact_exponential_objective(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& params, double eta,
                                   const ObjectiveOptions& options) {
  double J = 0.0;
  enumerate(mdp, params, options, [&](const Trajectory& tr, double weight) {
    double total = tr.terminal_cost;
    for (double c : tr.realized_cost_terms) total += c;
    J += weight * std::exp(eta * total);
  });
  return J;
}

std::vector<double> mean_exponentiated_tails(std::span<const Trajectory> batch, double eta) {
  if (batch.empty()) return {};
  const int T = batch.front().horizon();
  std::vector<double> mean(T, 0.0);
  for (const auto& tr : batch) {
    const auto tails = scaled_tails(tr, eta);
    for (int t = 0; t < T; ++t) mean[t] += std::exp(tails[t]);
  }
  for (auto& v : mean) v /= static_cast<double>(batch.size());
  return mean;
}

ReinforceResult train_reinforce(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& init, double eta,
                                const ReinforceConfig& config, Rng& rng) {
  if (eta == 0.0) throw InvalidRisk("train_reinforce requires eta != 0");
  if (config.batch < 1 || config.iters < 0 || !(config.lr > 0.0)) throw ConfigError("invalid REINFORCE config");
  ReinforceResult result{init, TrainLog{{"iteration", "objective", "grad_norm", "wall_time"}, {}}};
  auto& params = result.params;
  const auto start = std::chrono::steady_clock::now();
  std::vector<Trajectory> batch(config.batch);
  for (int it = 0; it < config.iters; ++it) {
    for (auto& tr : batch) tr = sample_trajectory(mdp, params, rng);
    Baseline baseline;
    std::vector<double> means;
    if (config.baseline_mode == BaselineMode::MeanReturn) {
      means = mean_exponentiated_tails(batch, eta);
      baseline = [&means](int t, int) { return means[t]; };
    }
    const auto est = grad_estimate(batch, params, eta, baseline);
    LogSumExpAccumulator acc;
    for (const auto& tr : batch) acc.add(scaled_tails(tr, eta).front());
    const double objective = (acc.value() - std::log(static_cast<double>(batch.size()))) / eta;
    double norm = 0.0;
    for (double g : est.grad) norm += g * g;
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < params.logits.size(); ++j) params.logits[j] -= config.lr * est.grad[j];
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.add({static_cast<double>(it), objective, norm, wall});
  }
  return result;
}

}  // namespace riskctl
