#pragma once

#include <memory>
#include <span>
#include <vector>

#include "riskctl/core.hpp"
#include "riskctl/rng.hpp"

namespace riskctl {

struct EnvStep {
  std::vector<double> observation;
  double cost = 0.0;
  // Episode over. `terminal` separates absorbing ends from time-limit truncation.
  bool done = false;
  bool terminal = false;
  int step = 0;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual EnvStep step(std::span<const double> action) = 0;
};

struct PendulumConfig {
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double dt = 0.05;
  double max_torque = 2.0;
  double max_speed = 8.0;
  int episode_length = 200;

  void validate() const;
};

struct PendulumState {
  double theta = 0.0;  // 0 is upright
  double theta_dot = 0.0;
};

// Wraps into (-pi, pi].
double wrap_angle(double theta);

struct PendulumTransition {
  PendulumState next;
  double cost = 0.0;
};

// Semi-implicit Euler step of the swing-up pendulum. u is clipped to
// [-max_torque, max_torque]; the cost is charged on the pre-step state.
PendulumTransition pendulum_step(const PendulumState& s, double u, const PendulumConfig& config);
PendulumState pendulum_reset(const PendulumConfig& config, Rng& rng);
std::vector<double> pendulum_observation(const PendulumState& s);

// Observation (cos theta, sin theta, theta_dot); action is torque in newton-metres.
class PendulumEnv : public Environment {
 public:
  explicit PendulumEnv(PendulumConfig config = {});

  int observation_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  std::vector<double> reset(Rng& rng) override;
  EnvStep step(std::span<const double> action) override;

  const PendulumConfig& config() const { return config_; }
  const PendulumState& state() const { return state_; }
  void set_state(const PendulumState& s) { state_ = s; }

 private:
  PendulumConfig config_;
  PendulumState state_;
  int t_ = 0;
};

// Episodic view of a FiniteHorizonMDP with one-hot observations. The action is
// the index in action[0]. Terminal cost is added to the cost of step T-1.
class MdpEnv : public Environment {
 public:
  explicit MdpEnv(FiniteHorizonMDP mdp);

  int observation_dim() const override { return mdp_.num_states(); }
  int action_dim() const override { return 1; }
  // Draws x_0 from rng and seeds the transition stream from it.
  std::vector<double> reset(Rng& rng) override;
  EnvStep step(std::span<const double> action) override;
  EnvStep step_index(int u);

  int state() const { return x_; }
  int time() const { return t_; }
  const FiniteHorizonMDP& mdp() const { return mdp_; }

 private:
  std::vector<double> one_hot(int x) const;

  FiniteHorizonMDP mdp_;
  Rng rng_{0};
  int x_ = 0;
  int t_ = 0;
};

}  // namespace riskctl
