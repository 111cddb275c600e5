#pragma once

#include <functional>
#include <span>
#include <vector>

#include "riskctl/core.hpp"
#include "riskctl/tabular.hpp"
#include "riskctl/train_log.hpp"

namespace riskctl {

// Time-invariant softmax policy pi(u|x) ∝ exp(logits[x][u]).
struct SoftmaxPolicyParams {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> logits;  // row-major [x][u]

  SoftmaxPolicyParams() = default;
  SoftmaxPolicyParams(int num_states, int num_actions, double fill = 0.0)
      : num_states(num_states), num_actions(num_actions),
        logits(static_cast<std::size_t>(num_states) * num_actions, fill) {}

  double& logit(int x, int u) { return logits[static_cast<std::size_t>(x) * num_actions + u]; }
  double logit(int x, int u) const { return logits[static_cast<std::size_t>(x) * num_actions + u]; }

  std::vector<double> probs(int x) const;
  std::vector<double> log_probs(int x) const;
  // Same distribution repeated over every time step.
  TabularPolicy as_tabular(int horizon) const;
};

// Baseline b(t, x). The estimator is unbiased for any such function.
using Baseline = std::function<double(int t, int x)>;

struct GradEstimate {
  std::vector<double> grad;  // shaped like logits, estimate of grad(J / eta)
  int num_samples = 0;
  // Per-coordinate sample variance of the single-trajectory terms and its mean.
  std::vector<double> coordinate_variance;
  double per_sample_variance = 0.0;
};

// x_0 ~ initial_dist, u_t ~ softmax(logits[x_t]), x_{t+1} ~ p. epsilon is 1.
Trajectory sample_trajectory(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& params, Rng& rng);

// Batch-average of
//   (eta+1)/eta * sum_t grad log pi(u_t|x_t) * exp(eta * head_t) * (exp(eta * tail_t) - b(t, x_t)),
// head_t = sum_{s < t} (c_s + log pi(u_s|x_s)), tail_t = c_T + sum_{s >= t} (c_s + log pi(u_s|x_s)).
// Empty baseline means b = 0.
GradEstimate grad_estimate(std::span<const Trajectory> batch, const SoftmaxPolicyParams& params, double eta,
                           const Baseline& baseline = {});

// Exact expectation of the estimator over all trajectories.
std::vector<double> exact_gradient_oracle(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& params, double eta,
                                          const Baseline& baseline = {}, const ObjectiveOptions& options = {});

// J(theta) = E exp(eta * C_theta) by enumeration.
double exact_exponential_objective(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& params, double eta,
                                   const ObjectiveOptions& options = {});

// Per-t batch means of exp(eta * tail_t), used as a state-independent baseline.
std::vector<double> mean_exponentiated_tails(std::span<const Trajectory> batch, double eta);

enum class BaselineMode { None, MeanReturn };

struct ReinforceConfig {
  double lr = 0.05;
  int batch = 64;
  int iters = 500;
  BaselineMode baseline_mode = BaselineMode::None;
};

struct ReinforceResult {
  SoftmaxPolicyParams params;
  // iteration, objective (batch estimate of (1/eta) log J), grad_norm, wall_time
  TrainLog log;
};

// Plain gradient descent on J / eta.
ReinforceResult train_reinforce(const FiniteHorizonMDP& mdp, const SoftmaxPolicyParams& init, double eta,
                                const ReinforceConfig& config, Rng& rng);

}  // namespace riskctl
