#include "riskctl/mdp_gen.hpp"

#include <cmath>
#include <vector>

namespace riskctl {

namespace {

std::vector<double> dirichlet_ones(Rng& rng, int n) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (auto& v : w) {
    v = -std::log(1.0 - rng.uniform());
    sum += v;
  }
  for (auto& v : w) v /= sum;
  // Push the rounding residue into the largest entry so the row sums to 1 within 1e-12.
  double total = 0.0;
  int largest = 0;
  for (int i = 0; i < n; ++i) {
    total += w[i];
    if (w[i] > w[largest]) largest = i;
  }
  w[largest] += 1.0 - total;
  return w;
}

}  // namespace

FiniteHorizonMDP random_mdp(Rng& rng, const RandomMdpOptions& o) {
  const int S = o.num_states;
  const int A = o.num_actions;
  const int T = o.horizon;
  std::vector<double> transition(static_cast<std::size_t>(T) * S * A * S, 0.0);
  std::vector<double> cost(static_cast<std::size_t>(T) * S * A);
  std::vector<double> terminal(S);
  for (int t = 0; t < T; ++t)
    for (int x = 0; x < S; ++x)
      for (int u = 0; u < A; ++u) {
        double* row = transition.data() + ((static_cast<std::size_t>(t) * S + x) * A + u) * S;
        if (o.deterministic) {
          row[rng.index(S)] = 1.0;
        } else {
          const auto w = dirichlet_ones(rng, S);
          std::copy(w.begin(), w.end(), row);
        }
      }
  for (auto& c : cost) c = o.cost_scale * rng.uniform();
  for (auto& c : terminal) c = o.terminal_cost_scale * rng.uniform();
  std::vector<double> init(S, 0.0);
  if (o.single_initial_state) {
    init[0] = 1.0;
  } else {
    init = dirichlet_ones(rng, S);
  }
  return FiniteHorizonMDP(S, A, T, std::move(transition), std::move(cost), std::move(terminal), std::move(init));
}

FiniteHorizonMDP deterministic_chain(Rng& rng, int num_states, int num_actions, int horizon) {
  const int S = num_states;
  const int A = num_actions;
  const int T = horizon;
  std::vector<double> transition(static_cast<std::size_t>(T) * S * A * S, 0.0);
  std::vector<double> cost(static_cast<std::size_t>(T) * S * A);
  std::vector<double> terminal(S);
  for (int t = 0; t < T; ++t)
    for (int x = 0; x < S; ++x)
      for (int u = 0; u < A; ++u)
        transition[((static_cast<std::size_t>(t) * S + x) * A + u) * S + (x + u) % S] = 1.0;
  for (auto& c : cost) c = rng.uniform();
  for (auto& c : terminal) c = rng.uniform();
  std::vector<double> init(S, 0.0);
  init[0] = 1.0;
  return FiniteHorizonMDP(S, A, T, std::move(transition), std::move(cost), std::move(terminal), std::move(init));
}

}  // namespace riskctl
