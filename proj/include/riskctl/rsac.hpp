#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskctl/envs.hpp"
#include "riskctl/mlp.hpp"
#include "riskctl/rng.hpp"
#include "riskctl/train_log.hpp"

namespace riskctl {

// (exp(eta v) - 1) / eta, or its second-order expansion v + eta v^2 / 2 when |eta| <= 1e-9.
double t_eta(double v, double eta);
// Derivative of t_eta in v: exp(eta v), or 1 + eta v on the expansion branch.
double t_eta_prime(double v, double eta);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

// One action coordinate of the tanh-squashed Gaussian policy,
// a = tanh(mu + exp(log_std) xi).
struct SquashedCoordinate {
  double action = 0.0;
  double log_prob = 0.0;  // Gaussian log density minus log(1 - a^2 + 1e-6)
  // Pathwise derivatives with xi held fixed.
  double daction_dmu = 0.0;
  double daction_dlog_std = 0.0;
  double dlogp_dmu = 0.0;
  double dlogp_dlog_std = 0.0;
  // Score function: derivatives of log pi(a) with the action held fixed.
  double score_mu = 0.0;
  double score_log_std = 0.0;
};
SquashedCoordinate squashed_gaussian(double mu, double log_std, double xi);

enum class ActorEstimator { Reparameterized, ScoreFunction };

struct RSACConfig {
  double eta = 0.0;
  double lr = 1e-3;
  double discount = 0.99;
  double alpha = 0.1;  // regularization coefficient on log pi
  double tau = 0.005;
  int batch_size = 256;
  int buffer_capacity = 100000;
  int num_critics = 2;
  int hidden_layers = 2;
  int hidden_units = 256;
  int total_steps = 30000;
  // Uniform random actions before this step; updates start here.
  int learning_starts = 100;
  int eval_interval = 5000;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
  bool override_eta_guard = false;
  ActorEstimator actor_estimator = ActorEstimator::Reparameterized;

  static constexpr double kEtaGuard = 0.03;

  // Throws ConfigError on malformed values and InvalidRisk when |eta| exceeds
  // the stable range without override_eta_guard.
  void validate() const;
};

nlohmann::json to_json(const RSACConfig& config);
// Unknown keys are rejected with ConfigError.
RSACConfig rsac_config_from_json(const nlohmann::json& doc);

template <class S>
struct RSACNetworks {
  MLP<S> q1, q2;
  MLP<S> v, v_target;
  MLP<S> policy;  // outputs (mean, log_std) per action dimension
  int obs_dim = 0;
  int act_dim = 0;

  static RSACNetworks init(int obs_dim, int act_dim, int hidden_layers, int hidden_units, Rng& rng);
  template <class Other>
  RSACNetworks<Other> cast() const;
  bool all_finite() const;
};

// Minibatch, one column per transition. Actions are in the normalized [-1, 1] space.
template <class S>
struct Batch {
  using Mat = typename MLP<S>::Mat;
  Mat obs;
  Mat act;
  Mat cost;          // 1 x B
  Mat next_obs;
  Mat not_terminal;  // 1 x B, 0 where the transition ended in an absorbing state
  int size() const { return static_cast<int>(obs.cols()); }
};

template <class S>
struct RSACGradients {
  MLP<S> q1, q2, v, policy;
  double critic_loss = 0.0;  // sum over both critics
  double value_loss = 0.0;
  double actor_loss = 0.0;
  bool all_finite() const;
};

// J_Q = mean 1/2 (T(Q - c) - T(discount * V_target(x')))^2 for one critic.
// Gradient per sample: dQ exp(eta (Q - c)) * residual. Returns the loss.
template <class S>
double critic_grad(const Batch<S>& batch, const MLP<S>& q, const MLP<S>& v_target, double eta, double discount,
                   MLP<S>* grad);

// J_V = mean 1/2 (T(V) - T(minQ(x, a) + alpha log pi(a|x)))^2 with a drawn from
// xi (act_dim x B). Returns the loss.
template <class S>
double value_grad(const Batch<S>& batch, const MLP<S>& v, const MLP<S>& q1, const MLP<S>& q2, const MLP<S>& policy,
                  double eta, double alpha, const typename MLP<S>::Mat& xi, MLP<S>* grad);

// Reparameterized: gradient of mean T(minQ(x, a_theta) + alpha log pi_theta(a_theta|x)).
// ScoreFunction: (1 + alpha eta) mean grad log pi(a|x) T(minQ + alpha log pi).
// Returns the sampled J_pi.
template <class S>
double actor_grad(const Batch<S>& batch, const MLP<S>& policy, const MLP<S>& q1, const MLP<S>& q2, double eta,
                  double alpha, const typename MLP<S>::Mat& xi, MLP<S>* grad,
                  ActorEstimator estimator = ActorEstimator::Reparameterized);

// All three gradients from one parameter snapshot; xi is shared by the value
// target and the actor.
template <class S>
RSACGradients<S> compute_gradients(const RSACNetworks<S>& nets, const Batch<S>& batch, const typename MLP<S>::Mat& xi,
                                   const RSACConfig& config);

template <class S>
struct RSACOptimizers {
  Adam<S> q1, q2, v, policy;
  static RSACOptimizers make(const RSACNetworks<S>& nets, double lr);
};

// One update: gradients, Adam steps and Polyak averaging of v_target. Throws
// NonFinite, leaving nets untouched, if any loss or gradient is non-finite.
template <class S>
RSACGradients<S> rsac_update(RSACNetworks<S>& nets, RSACOptimizers<S>& opt, const Batch<S>& batch,
                             const typename MLP<S>::Mat& xi, const RSACConfig& config);

// Policy output for one observation: mean action in [-1, 1] when deterministic,
// otherwise a squashed sample.
template <class S>
std::vector<double> policy_action(const MLP<S>& policy, std::span<const double> obs, Rng* rng);

class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int act_dim, int capacity);

  void add(std::span<const double> obs, std::span<const double> act, double cost, std::span<const double> next_obs,
           bool terminal);
  int size() const { return size_; }
  int capacity() const { return capacity_; }

  // Distinct indices within the minibatch, drawn uniformly.
  template <class S>
  Batch<S> sample(int batch_size, Rng& rng) const;

 private:
  int obs_dim_;
  int act_dim_;
  int capacity_;
  int size_ = 0;
  int next_ = 0;
  std::vector<double> obs_, act_, cost_, next_obs_, terminal_;
};

// Training precision. Gradient checks instantiate the same templates in double.
using Real = float;
using Agent = RSACNetworks<Real>;

struct EvalStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> episode_costs;
};

// Episode costs of the deterministic (mean) policy; actions scaled by max_action.
EvalStats evaluate_policy(const MLP<Real>& policy, Environment& env, int episodes, double max_action, Rng& rng);
// Same with actions drawn uniformly from [-max_action, max_action].
EvalStats evaluate_random(Environment& env, int episodes, double max_action, Rng& rng);

enum class TrainStatus { Completed, NonFinite };

struct RSACResult {
  Agent agent;  // last good parameters
  TrainLog log;  // step, actor_loss, critic_loss, value_loss, eval_cost, wall_time
  TrainStatus status = TrainStatus::Completed;
  std::string message;
  int steps_completed = 0;
};

// SAC-style loop with the risk-sensitive gradients. env_factory must return a
// fresh environment; one instance trains, another evaluates. Throws InvalidRisk
// for eta beyond the guard unless overridden.
RSACResult train(const std::function<std::unique_ptr<Environment>()>& env_factory, double max_action,
                 const RSACConfig& config);

nlohmann::json checkpoint_to_json(const Agent& agent, const RSACConfig& config, int step);
struct Checkpoint {
  Agent agent;
  RSACConfig config;
  int step = 0;
};
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

struct RobustnessRow {
  double length = 0.0;
  int trial = 0;
  double mean_cost = 0.0;
};

struct RobustnessSummary {
  double length = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> episode_costs;  // all rollouts over all trials
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;  // one per (length, trial)
  std::vector<RobustnessSummary> summary;  // one per length, min/max over trials
};

// Evaluates a trained policy on pendulums of the given pole lengths without retraining.
RobustnessReport evaluate_robustness(const MLP<Real>& policy, const PendulumConfig& base,
                                     const std::vector<double>& lengths, int num_trials, int rollouts_per_trial,
                                     Rng& rng);

}  // namespace riskctl
