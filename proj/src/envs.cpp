#include "riskctl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace riskctl {

void PendulumConfig::validate() const {
  if (!(gravity > 0.0 && mass > 0.0 && length > 0.0 && dt > 0.0 && max_torque > 0.0 && max_speed > 0.0) ||
      episode_length <= 0)
    throw InvalidModel("pendulum parameters must be positive");
}

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;  // now in [-pi, pi)
  if (w == -std::numbers::pi) w = std::numbers::pi;
  return w;
}

PendulumTransition pendulum_step(const PendulumState& s, double u, const PendulumConfig& c) {
  u = std::clamp(u, -c.max_torque, c.max_torque);
  const double th = wrap_angle(s.theta);
  const double cost = th * th + 0.1 * s.theta_dot * s.theta_dot + 0.001 * u * u;
  double thdot = s.theta_dot +
                 (3.0 * c.gravity / (2.0 * c.length) * std::sin(s.theta) + 3.0 / (c.mass * c.length * c.length) * u) * c.dt;
  thdot = std::clamp(thdot, -c.max_speed, c.max_speed);
  return {{s.theta + thdot * c.dt, thdot}, cost};
}

PendulumState pendulum_reset(const PendulumConfig&, Rng& rng) {
  PendulumState s;
  s.theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
  s.theta_dot = rng.uniform(-1.0, 1.0);
  return s;
}

std::vector<double> pendulum_observation(const PendulumState& s) {
  return {std::cos(s.theta), std::sin(s.theta), s.theta_dot};
}

PendulumEnv::PendulumEnv(PendulumConfig config) : config_(config) { config_.validate(); }

std::vector<double> PendulumEnv::reset(Rng& rng) {
  state_ = pendulum_reset(config_, rng);
  t_ = 0;
  return pendulum_observation(state_);
}

EnvStep PendulumEnv::step(std::span<const double> action) {
  const auto tr = pendulum_step(state_, action.empty() ? 0.0 : action[0], config_);
  state_ = tr.next;
  ++t_;
  EnvStep out;
  out.observation = pendulum_observation(state_);
  out.cost = tr.cost;
  out.done = t_ >= config_.episode_length;
  out.terminal = false;
  out.step = t_;
  return out;
}

MdpEnv::MdpEnv(FiniteHorizonMDP mdp) : mdp_(std::move(mdp)) {}

std::vector<double> MdpEnv::one_hot(int x) const {
  std::vector<double> o(mdp_.num_states(), 0.0);
  o[x] = 1.0;
  return o;
}

std::vector<double> MdpEnv::reset(Rng& rng) {
  x_ = rng.categorical(mdp_.initial_dist());
  t_ = 0;
  rng_ = Rng(rng.next_u64());
  return one_hot(x_);
}

EnvStep MdpEnv::step(std::span<const double> action) {
  return step_index(static_cast<int>(std::lround(action.empty() ? 0.0 : action[0])));
}

EnvStep MdpEnv::step_index(int u) {
  if (t_ >= mdp_.horizon()) throw InvalidModel("MdpEnv stepped past the horizon; call reset");
  if (u < 0 || u >= mdp_.num_actions()) throw InvalidModel("action index out of range");
  EnvStep out;
  out.cost = mdp_.cost(t_, x_, u);
  x_ = rng_.categorical(mdp_.transition_row(t_, x_, u));
  ++t_;
  out.step = t_;
  if (t_ == mdp_.horizon()) {
    out.cost += mdp_.terminal_cost(x_);
    out.done = true;
    out.terminal = true;
  }
  out.observation = one_hot(x_);
  return out;
}

}  // namespace riskctl
