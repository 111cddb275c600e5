#pragma once

#include "riskctl/core.hpp"
#include "riskctl/rng.hpp"

namespace riskctl {

struct RandomMdpOptions {
  int num_states = 2;
  int num_actions = 2;
  int horizon = 2;
  bool deterministic = false;
  // Put all initial mass on state 0.
  bool single_initial_state = false;
  double cost_scale = 1.0;
  double terminal_cost_scale = 1.0;
};

// Random MDP with Dirichlet(1) transition rows (or uniformly drawn successors
// when deterministic) and Uniform[0, scale) costs.
FiniteHorizonMDP random_mdp(Rng& rng, const RandomMdpOptions& options);

// Deterministic chain: action u moves state x to (x + u) mod S.
FiniteHorizonMDP deterministic_chain(Rng& rng, int num_states, int num_actions, int horizon);

}  // namespace riskctl
