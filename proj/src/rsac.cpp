#include "riskctl/rsac.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "riskctl/errors.hpp"

namespace riskctl {

namespace {

constexpr double kExpansionThreshold = 1e-9;

}  // namespace

double t_eta(double v, double eta) {
  if (std::abs(eta) <= kExpansionThreshold) return v + 0.5 * eta * v * v;
  return std::expm1(eta * v) / eta;
}

double t_eta_prime(double v, double eta) {
  if (std::abs(eta) <= kExpansionThreshold) return 1.0 + eta * v;
  return std::exp(eta * v);
}

SquashedCoordinate squashed_gaussian(double mu, double log_std, double xi) {
  const double sigma = std::exp(log_std);
  const double pre = mu + sigma * xi;
  const double a = std::tanh(pre);
  const double one_minus = 1.0 - a * a;
  SquashedCoordinate c;
  c.action = a;
  c.log_prob = -0.5 * xi * xi - log_std - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(one_minus + kSquashEps);
  const double dlogp_dpre = 2.0 * a * one_minus / (one_minus + kSquashEps);
  c.daction_dmu = one_minus;
  c.daction_dlog_std = one_minus * sigma * xi;
  c.dlogp_dmu = dlogp_dpre;
  c.dlogp_dlog_std = dlogp_dpre * sigma * xi - 1.0;
  c.score_mu = xi / sigma;
  c.score_log_std = xi * xi - 1.0;
  return c;
}

void RSACConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid RSAC config: " + what); };
  if (!std::isfinite(eta)) fail("eta must be finite");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (!(discount > 0.0 && discount <= 1.0)) fail("discount must be in (0, 1]");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must be in (0, 1]");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (buffer_capacity < batch_size) fail("buffer_capacity must be >= batch_size");
  if (num_critics != 2) fail("num_critics must be 2");
  if (hidden_layers < 1 || hidden_units < 1) fail("hidden_layers and hidden_units must be >= 1");
  if (total_steps < 0 || learning_starts < 0) fail("total_steps and learning_starts must be >= 0");
  if (eval_interval < 1 || eval_episodes < 1) fail("eval_interval and eval_episodes must be >= 1");
  if (std::abs(eta) > kEtaGuard && !override_eta_guard)
    throw InvalidRisk("|eta| = " + std::to_string(std::abs(eta)) +
                      " exceeds the stable range 0.03 for RSAC; training is expected to diverge (override to force)");
}

nlohmann::json to_json(const RSACConfig& c) {
  return nlohmann::json{{"eta", c.eta},
                        {"lr", c.lr},
                        {"discount", c.discount},
                        {"alpha", c.alpha},
                        {"tau", c.tau},
                        {"batch_size", c.batch_size},
                        {"buffer_capacity", c.buffer_capacity},
                        {"num_critics", c.num_critics},
                        {"hidden_layers", c.hidden_layers},
                        {"hidden_units", c.hidden_units},
                        {"total_steps", c.total_steps},
                        {"learning_starts", c.learning_starts},
                        {"eval_interval", c.eval_interval},
                        {"eval_episodes", c.eval_episodes},
                        {"seed", c.seed},
                        {"override_eta_guard", c.override_eta_guard},
                        {"actor_estimator",
                         c.actor_estimator == ActorEstimator::Reparameterized ? "reparameterized" : "score_function"}};
}

RSACConfig rsac_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("RSAC config must be an object");
  RSACConfig c;
  try {
    for (const auto& [key, val] : doc.items()) {
      if (key == "eta") c.eta = val.get<double>();
      else if (key == "lr") c.lr = val.get<double>();
      else if (key == "discount") c.discount = val.get<double>();
      else if (key == "alpha") c.alpha = val.get<double>();
      else if (key == "tau") c.tau = val.get<double>();
      else if (key == "batch_size") c.batch_size = val.get<int>();
      else if (key == "buffer_capacity") c.buffer_capacity = val.get<int>();
      else if (key == "num_critics") c.num_critics = val.get<int>();
      else if (key == "hidden_layers") c.hidden_layers = val.get<int>();
      else if (key == "hidden_units") c.hidden_units = val.get<int>();
      else if (key == "total_steps") c.total_steps = val.get<int>();
      else if (key == "learning_starts") c.learning_starts = val.get<int>();
      else if (key == "eval_interval") c.eval_interval = val.get<int>();
      else if (key == "eval_episodes") c.eval_episodes = val.get<int>();
      else if (key == "seed") c.seed = val.get<std::uint64_t>();
      else if (key == "override_eta_guard") c.override_eta_guard = val.get<bool>();
      else if (key == "actor_estimator") {
        const auto s = val.get<std::string>();
        if (s == "reparameterized") c.actor_estimator = ActorEstimator::Reparameterized;
        else if (s == "score_function") c.actor_estimator = ActorEstimator::ScoreFunction;
        else throw ConfigError("actor_estimator must be 'reparameterized' or 'score_function'");
      } else {
        throw ConfigError("unknown RSAC config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed RSAC config: ") + e.what());
  }
  return c;
}

template <class S>
RSACNetworks<S> RSACNetworks<S>::init(int obs_dim, int act_dim, int hidden_layers, int hidden_units, Rng& rng) {
  auto sizes = [&](int in, int out) {
    std::vector<int> s{in};
    for (int l = 0; l < hidden_layers; ++l) s.push_back(hidden_units);
    s.push_back(out);
    return s;
  };
  RSACNetworks n;
  n.obs_dim = obs_dim;
  n.act_dim = act_dim;
  n.q1 = MLP<S>::init(sizes(obs_dim + act_dim, 1), rng);
  n.q2 = MLP<S>::init(sizes(obs_dim + act_dim, 1), rng);
  n.v = MLP<S>::init(sizes(obs_dim, 1), rng);
  n.v_target = n.v;
  n.policy = MLP<S>::init(sizes(obs_dim, 2 * act_dim), rng);
  return n;
}

template <class S>
template <class Other>
RSACNetworks<Other> RSACNetworks<S>::cast() const {
  RSACNetworks<Other> n;
  n.obs_dim = obs_dim;
  n.act_dim = act_dim;
  n.q1 = q1.template cast<Other>();
  n.q2 = q2.template cast<Other>();
  n.v = v.template cast<Other>();
  n.v_target = v_target.template cast<Other>();
  n.policy = policy.template cast<Other>();
  return n;
}

template <class S>
bool RSACNetworks<S>::all_finite() const {
  return q1.all_finite() && q2.all_finite() && v.all_finite() && v_target.all_finite() && policy.all_finite();
}

template <class S>
bool RSACGradients<S>::all_finite() const {
  return std::isfinite(critic_loss) && std::isfinite(value_loss) && std::isfinite(actor_loss) && q1.all_finite() &&
         q2.all_finite() && v.all_finite() && policy.all_finite();
}

namespace {

template <class S>
using MatT = typename MLP<S>::Mat;

template <class S>
MatT<S> stack_rows(const MatT<S>& top, const MatT<S>& bottom) {
  MatT<S> out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFinite(std::string("non-finite ") + what + " (eta * value out of range)");
}

// Policy sample and both critics evaluated at it, shared by the value target and the actor.
template <class S>
struct PolicyPass {
  typename MLP<S>::Tape policy_tape;
  MatT<S> action;  // act_dim x B
  std::vector<SquashedCoordinate> coords;  // [b * act_dim + j]
  std::vector<char> log_std_active;         // 1 where the clamp is not saturated
  std::vector<double> log_prob;             // per sample
  MatT<S> q_input;
  typename MLP<S>::Tape q1_tape, q2_tape;
  std::vector<double> min_q;
  std::vector<char> pick_second;
  std::vector<double> z;  // min_q + alpha log pi
};

template <class S>
PolicyPass<S> run_policy(const MatT<S>& obs, const MLP<S>& policy, const MLP<S>& q1, const MLP<S>& q2, double alpha,
                         const MatT<S>& xi) {
  const int B = static_cast<int>(obs.cols());
  const int A = static_cast<int>(xi.rows());
  PolicyPass<S> p;
  const MatT<S> out = policy.forward(obs, &p.policy_tape);
  p.action.resize(A, B);
  p.coords.resize(static_cast<std::size_t>(A) * B);
  p.log_std_active.resize(static_cast<std::size_t>(A) * B);
  p.log_prob.assign(B, 0.0);
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < A; ++j) {
      const double raw = static_cast<double>(out(A + j, b));
      const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
      const auto c = squashed_gaussian(static_cast<double>(out(j, b)), log_std, static_cast<double>(xi(j, b)));
      const auto k = static_cast<std::size_t>(b) * A + j;
      p.coords[k] = c;
      p.log_std_active[k] = raw > kLogStdMin && raw < kLogStdMax;
      p.action(j, b) = static_cast<S>(c.action);
      p.log_prob[b] += c.log_prob;
    }
  p.q_input = stack_rows<S>(obs, p.action);
  const MatT<S> v1 = q1.forward(p.q_input, &p.q1_tape);
  const MatT<S> v2 = q2.forward(p.q_input, &p.q2_tape);
  p.min_q.resize(B);
  p.pick_second.resize(B);
  p.z.resize(B);
  for (int b = 0; b < B; ++b) {
    p.pick_second[b] = v2(0, b) < v1(0, b);
    p.min_q[b] = static_cast<double>(p.pick_second[b] ? v2(0, b) : v1(0, b));
    p.z[b] = p.min_q[b] + alpha * p.log_prob[b];
  }
  return p;
}

template <class S>
double value_from_pass(const Batch<S>& batch, const MLP<S>& v, const PolicyPass<S>& pass, double eta, MLP<S>* grad) {
  const int B = batch.size();
  typename MLP<S>::Tape tape;
  const MatT<S> V = v.forward(batch.obs, &tape);
  MatT<S> dV(1, B);
  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const double vb = static_cast<double>(V(0, b));
    const double r = t_eta(vb, eta) - t_eta(pass.z[b], eta);
    loss += 0.5 * r * r;
    dV(0, b) = static_cast<S>(t_eta_prime(vb, eta) * r / B);
  }
  loss /= B;
  require_finite(loss, "value loss");
  if (grad) v.backward(tape, dV, grad, false);
  return loss;
}

template <class S>
double actor_from_pass(const Batch<S>& batch, const MLP<S>& policy, const MLP<S>& q1, const MLP<S>& q2,
                       const PolicyPass<S>& pass, double eta, double alpha, ActorEstimator estimator, MLP<S>* grad) {
  const int B = batch.size();
  const int A = static_cast<int>(pass.action.rows());
  const int obs_dim = static_cast<int>(batch.obs.rows());
  double loss = 0.0;
  for (int b = 0; b < B; ++b) loss += t_eta(pass.z[b], eta);
  loss /= B;
  require_finite(loss, "actor loss");
  if (!grad) return loss;

  MatT<S> dout = MatT<S>::Zero(2 * A, B);
  if (estimator == ActorEstimator::Reparameterized) {
    MatT<S> d1 = MatT<S>::Zero(1, B);
    MatT<S> d2 = MatT<S>::Zero(1, B);
    std::vector<double> up(B);
    for (int b = 0; b < B; ++b) {
      up[b] = t_eta_prime(pass.z[b], eta) / B;
      (pass.pick_second[b] ? d2 : d1)(0, b) = static_cast<S>(up[b]);
    }
    const MatT<S> g1 = q1.backward(pass.q1_tape, d1, nullptr, true);
    const MatT<S> g2 = q2.backward(pass.q2_tape, d2, nullptr, true);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < A; ++j) {
        const auto k = static_cast<std::size_t>(b) * A + j;
        const auto& c = pass.coords[k];
        const double dq_da = static_cast<double>(g1(obs_dim + j, b) + g2(obs_dim + j, b));
        dout(j, b) = static_cast<S>(dq_da * c.daction_dmu + alpha * up[b] * c.dlogp_dmu);
        if (pass.log_std_active[k])
          dout(A + j, b) = static_cast<S>(dq_da * c.daction_dlog_std + alpha * up[b] * c.dlogp_dlog_std);
      }
  } else {
    const double factor = 1.0 + alpha * eta;
    for (int b = 0; b < B; ++b) {
      const double w = factor * t_eta(pass.z[b], eta) / B;
      for (int j = 0; j < A; ++j) {
        const auto k = static_cast<std::size_t>(b) * A + j;
        dout(j, b) = static_cast<S>(w * pass.coords[k].score_mu);
        if (pass.log_std_active[k]) dout(A + j, b) = static_cast<S>(w * pass.coords[k].score_log_std);
      }
    }
  }
  policy.backward(pass.policy_tape, dout, grad, false);
  return loss;
}

}  // namespace

template <class S>
double critic_grad(const Batch<S>& batch, const MLP<S>& q, const MLP<S>& v_target, double eta, double discount,
                   MLP<S>* grad) {
  const int B = batch.size();
  typename MLP<S>::Tape tape;
  const MatT<S> Q = q.forward(stack_rows<S>(batch.obs, batch.act), &tape);
  const MatT<S> Vn = v_target.forward(batch.next_obs);
  MatT<S> dQ(1, B);
  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const double adv = static_cast<double>(Q(0, b)) - static_cast<double>(batch.cost(0, b));
    const double next = discount * static_cast<double>(batch.not_terminal(0, b)) * static_cast<double>(Vn(0, b));
    const double r = t_eta(adv, eta) - t_eta(next, eta);
    loss += 0.5 * r * r;
    dQ(0, b) = static_cast<S>(t_eta_prime(adv, eta) * r / B);
  }
  loss /= B;
  require_finite(loss, "critic loss");
  if (grad) q.backward(tape, dQ, grad, false);
  return loss;
}

template <class S>
double value_grad(const Batch<S>& batch, const MLP<S>& v, const MLP<S>& q1, const MLP<S>& q2, const MLP<S>& policy,
                  double eta, double alpha, const MatT<S>& xi, MLP<S>* grad) {
  const auto pass = run_policy<S>(batch.obs, policy, q1, q2, alpha, xi);
  return value_from_pass<S>(batch, v, pass, eta, grad);
}

template <class S>
double actor_grad(const Batch<S>& batch, const MLP<S>& policy, const MLP<S>& q1, const MLP<S>& q2, double eta,
                  double alpha, const MatT<S>& xi, MLP<S>* grad, ActorEstimator estimator) {
  const auto pass = run_policy<S>(batch.obs, policy, q1, q2, alpha, xi);
  return actor_from_pass<S>(batch, policy, q1, q2, pass, eta, alpha, estimator, grad);
}

template <class S>
RSACGradients<S> compute_gradients(const RSACNetworks<S>& nets, const Batch<S>& batch, const MatT<S>& xi,
                                   const RSACConfig& config) {
  RSACGradients<S> g{nets.q1.zeros_like(), nets.q2.zeros_like(), nets.v.zeros_like(), nets.policy.zeros_like()};
  const auto pass = run_policy<S>(batch.obs, nets.policy, nets.q1, nets.q2, config.alpha, xi);
  g.value_loss = value_from_pass<S>(batch, nets.v, pass, config.eta, &g.v);
  g.actor_loss = actor_from_pass<S>(batch, nets.policy, nets.q1, nets.q2, pass, config.eta, config.alpha,
                                    config.actor_estimator, &g.policy);
  g.critic_loss = critic_grad<S>(batch, nets.q1, nets.v_target, config.eta, config.discount, &g.q1) +
                  critic_grad<S>(batch, nets.q2, nets.v_target, config.eta, config.discount, &g.q2);
  return g;
}

template <class S>
RSACOptimizers<S> RSACOptimizers<S>::make(const RSACNetworks<S>& nets, double lr) {
  return RSACOptimizers{Adam<S>(nets.q1, lr), Adam<S>(nets.q2, lr), Adam<S>(nets.v, lr), Adam<S>(nets.policy, lr)};
}

template <class S>
RSACGradients<S> rsac_update(RSACNetworks<S>& nets, RSACOptimizers<S>& opt, const Batch<S>& batch, const MatT<S>& xi,
                             const RSACConfig& config) {
  auto g = compute_gradients<S>(nets, batch, xi, config);
  if (!g.all_finite()) throw NonFinite("non-finite RSAC gradient (eta * value out of range)");
  opt.q1.step(nets.q1, g.q1);
  opt.q2.step(nets.q2, g.q2);
  opt.v.step(nets.v, g.v);
  opt.policy.step(nets.policy, g.policy);
  nets.v_target.polyak(nets.v, static_cast<S>(config.tau));
  return g;
}

template <class S>
std::vector<double> policy_action(const MLP<S>& policy, std::span<const double> obs, Rng* rng) {
  MatT<S> x(static_cast<Eigen::Index>(obs.size()), 1);
  for (std::size_t i = 0; i < obs.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = static_cast<S>(obs[i]);
  const MatT<S> out = policy.forward(x);
  const int A = static_cast<int>(out.rows()) / 2;
  std::vector<double> a(A);
  for (int j = 0; j < A; ++j) {
    const double mu = static_cast<double>(out(j, 0));
    if (!rng) {
      a[j] = std::tanh(mu);
    } else {
      const double log_std = std::clamp(static_cast<double>(out(A + j, 0)), kLogStdMin, kLogStdMax);
      a[j] = std::tanh(mu + std::exp(log_std) * rng->normal());
    }
  }
  return a;
}

ReplayBuffer::ReplayBuffer(int obs_dim, int act_dim, int capacity)
    : obs_dim_(obs_dim), act_dim_(act_dim), capacity_(capacity) {
  if (capacity <= 0) throw ConfigError("replay buffer capacity must be positive");
  obs_.resize(static_cast<std::size_t>(capacity) * obs_dim);
  next_obs_.resize(obs_.size());
  act_.resize(static_cast<std::size_t>(capacity) * act_dim);
  cost_.resize(capacity);
  terminal_.resize(capacity);
}

void ReplayBuffer::add(std::span<const double> obs, std::span<const double> act, double cost,
                       std::span<const double> next_obs, bool terminal) {
  const auto i = static_cast<std::size_t>(next_);
  std::copy(obs.begin(), obs.end(), obs_.begin() + i * obs_dim_);
  std::copy(next_obs.begin(), next_obs.end(), next_obs_.begin() + i * obs_dim_);
  std::copy(act.begin(), act.end(), act_.begin() + i * act_dim_);
  cost_[i] = cost;
  terminal_[i] = terminal ? 1.0 : 0.0;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

template <class S>
Batch<S> ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (batch_size > size_) throw ConfigError("replay buffer holds fewer transitions than the batch size");
  // Floyd's algorithm: batch_size distinct indices in [0, size).
  std::vector<int> idx;
  idx.reserve(batch_size);
  for (int j = size_ - batch_size; j < size_; ++j) {
    const int t = static_cast<int>(rng.index(static_cast<std::size_t>(j) + 1));
    idx.push_back(std::find(idx.begin(), idx.end(), t) == idx.end() ? t : j);
  }
  Batch<S> b;
  b.obs.resize(obs_dim_, batch_size);
  b.next_obs.resize(obs_dim_, batch_size);
  b.act.resize(act_dim_, batch_size);
  b.cost.resize(1, batch_size);
  b.not_terminal.resize(1, batch_size);
  for (int k = 0; k < batch_size; ++k) {
    const auto i = static_cast<std::size_t>(idx[k]);
    for (int d = 0; d < obs_dim_; ++d) {
      b.obs(d, k) = static_cast<S>(obs_[i * obs_dim_ + d]);
      b.next_obs(d, k) = static_cast<S>(next_obs_[i * obs_dim_ + d]);
    }
    for (int d = 0; d < act_dim_; ++d) b.act(d, k) = static_cast<S>(act_[i * act_dim_ + d]);
    b.cost(0, k) = static_cast<S>(cost_[i]);
    b.not_terminal(0, k) = static_cast<S>(1.0 - terminal_[i]);
  }
  return b;
}

namespace {

EvalStats summarize(std::vector<double> costs) {
  EvalStats s;
  s.episode_costs = std::move(costs);
  if (s.episode_costs.empty()) return s;
  s.min = *std::min_element(s.episode_costs.begin(), s.episode_costs.end());
  s.max = *std::max_element(s.episode_costs.begin(), s.episode_costs.end());
  for (double c : s.episode_costs) s.mean += c;
  s.mean /= static_cast<double>(s.episode_costs.size());
  return s;
}

template <class ActionFn>
EvalStats run_episodes(Environment& env, int episodes, Rng& rng, ActionFn&& action) {
  std::vector<double> costs;
  costs.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    auto obs = env.reset(rng);
    double total = 0.0;
    for (;;) {
      const auto a = action(obs);
      auto step = env.step(a);
      total += step.cost;
      if (step.done) break;
      obs = std::move(step.observation);
    }
    costs.push_back(total);
  }
  return summarize(std::move(costs));
}

}  // namespace

EvalStats evaluate_policy(const MLP<Real>& policy, Environment& env, int episodes, double max_action, Rng& rng) {
  return run_episodes(env, episodes, rng, [&](const std::vector<double>& obs) {
    auto a = policy_action<Real>(policy, obs, nullptr);
    for (auto& v : a) v *= max_action;
    return a;
  });
}

EvalStats evaluate_random(Environment& env, int episodes, double max_action, Rng& rng) {
  Rng action_rng = rng.derive(0x5eed);
  return run_episodes(env, episodes, rng, [&](const std::vector<double>&) {
    std::vector<double> a(env.action_dim());
    for (auto& v : a) v = action_rng.uniform(-max_action, max_action);
    return a;
  });
}

RSACResult train(const std::function<std::unique_ptr<Environment>()>& env_factory, double max_action,
                 const RSACConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Rng root(config.seed);
  Rng init_rng = root.derive(1);
  Rng env_rng = root.derive(2);
  Rng action_rng = root.derive(3);
  const Rng buffer_root = root.derive(4);
  const Rng noise_root = root.derive(5);
  const Rng eval_root = root.derive(6);

  auto env = env_factory();
  auto eval_env = env_factory();
  const int obs_dim = env->observation_dim();
  const int act_dim = env->action_dim();

  RSACResult result;
  result.agent = Agent::init(obs_dim, act_dim, config.hidden_layers, config.hidden_units, init_rng);
  result.log.columns = {"step", "actor_loss", "critic_loss", "value_loss", "eval_cost", "wall_time"};
  auto& nets = result.agent;
  auto opt = RSACOptimizers<Real>::make(nets, config.lr);
  ReplayBuffer buffer(obs_dim, act_dim, config.buffer_capacity);

  auto obs = env->reset(env_rng);
  std::vector<double> action(act_dim);
  std::vector<double> scaled(act_dim);
  double actor_loss = std::nan("");
  double critic_loss = std::nan("");
  double value_loss = std::nan("");
  int step = 0;
  for (; step < config.total_steps; ++step) {
    if (step < config.learning_starts) {
      for (auto& a : action) a = action_rng.uniform(-1.0, 1.0);
    } else {
      action = policy_action<Real>(nets.policy, obs, &action_rng);
    }
    for (int j = 0; j < act_dim; ++j) scaled[j] = action[j] * max_action;
    auto es = env->step(scaled);
    buffer.add(obs, action, es.cost, es.observation, es.terminal);
    obs = es.done ? env->reset(env_rng) : std::move(es.observation);

    if (step >= config.learning_starts && buffer.size() >= config.batch_size) {
      Rng batch_rng = buffer_root.derive(static_cast<std::uint64_t>(step));
      Rng noise_rng = noise_root.derive(static_cast<std::uint64_t>(step));
      const auto batch = buffer.sample<Real>(config.batch_size, batch_rng);
      MLP<Real>::Mat xi(act_dim, config.batch_size);
      for (Eigen::Index k = 0; k < xi.size(); ++k) xi.data()[k] = static_cast<Real>(noise_rng.normal());
      try {
        const auto g = rsac_update<Real>(nets, opt, batch, xi, config);
        actor_loss = g.actor_loss;
        critic_loss = g.critic_loss;
        value_loss = g.value_loss;
      } catch (const NonFinite& e) {
        result.status = TrainStatus::NonFinite;
        result.message = std::string(e.what()) + " at step " + std::to_string(step);
        break;
      }
    }
    if ((step + 1) % config.eval_interval == 0 || step + 1 == config.total_steps) {
      Rng eval_rng = eval_root.derive(static_cast<std::uint64_t>(step));
      const auto eval = evaluate_policy(nets.policy, *eval_env, config.eval_episodes, max_action, eval_rng);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.add({static_cast<double>(step + 1), actor_loss, critic_loss, value_loss, eval.mean, wall});
    }
  }
  result.steps_completed = step;
  return result;
}

namespace {

nlohmann::json net_json(const MLP<Real>& net) { return {{"sizes", net.sizes()}, {"params", net.flatten()}}; }

MLP<Real> net_from(const nlohmann::json& j) {
  MLP<Real> net(j.at("sizes").get<std::vector<int>>());
  net.unflatten(j.at("params").get<std::vector<double>>());
  return net;
}

}  // namespace

nlohmann::json checkpoint_to_json(const Agent& agent, const RSACConfig& config, int step) {
  return nlohmann::json{{"step", step},
                        {"config", to_json(config)},
                        {"obs_dim", agent.obs_dim},
                        {"act_dim", agent.act_dim},
                        {"networks",
                         {{"q1", net_json(agent.q1)},
                          {"q2", net_json(agent.q2)},
                          {"v", net_json(agent.v)},
                          {"v_target", net_json(agent.v_target)},
                          {"policy", net_json(agent.policy)}}}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  try {
    Checkpoint c;
    c.step = doc.at("step").get<int>();
    c.config = rsac_config_from_json(doc.at("config"));
    c.agent.obs_dim = doc.at("obs_dim").get<int>();
    c.agent.act_dim = doc.at("act_dim").get<int>();
    const auto& n = doc.at("networks");
    c.agent.q1 = net_from(n.at("q1"));
    c.agent.q2 = net_from(n.at("q2"));
    c.agent.v = net_from(n.at("v"));
    c.agent.v_target = net_from(n.at("v_target"));
    c.agent.policy = net_from(n.at("policy"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

RobustnessReport evaluate_robustness(const MLP<Real>& policy, const PendulumConfig& base,
                                     const std::vector<double>& lengths, int num_trials, int rollouts_per_trial,
                                     Rng& rng) {
  RobustnessReport report;
  for (std::size_t li = 0; li < lengths.size(); ++li) {
    PendulumConfig cfg = base;
    cfg.length = lengths[li];
    PendulumEnv env(cfg);
    RobustnessSummary s;
    s.length = lengths[li];
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < num_trials; ++trial) {
      Rng trial_rng = rng.derive(static_cast<std::uint64_t>(li) * 1000003u + static_cast<std::uint64_t>(trial));
      const auto stats = evaluate_policy(policy, env, rollouts_per_trial, cfg.max_torque, trial_rng);
      report.rows.push_back({cfg.length, trial, stats.mean});
      s.mean += stats.mean;
      s.min = std::min(s.min, stats.mean);
      s.max = std::max(s.max, stats.mean);
      s.episode_costs.insert(s.episode_costs.end(), stats.episode_costs.begin(), stats.episode_costs.end());
    }
    if (num_trials > 0) s.mean /= num_trials;
    report.summary.push_back(std::move(s));
  }
  return report;
}

#define RISKCTL_INSTANTIATE(S)                                                                                       \
  template struct RSACNetworks<S>;                                                                                   \
  template struct RSACGradients<S>;                                                                                  \
  template struct RSACOptimizers<S>;                                                                                 \
  template double critic_grad<S>(const Batch<S>&, const MLP<S>&, const MLP<S>&, double, double, MLP<S>*);           \
  template double value_grad<S>(const Batch<S>&, const MLP<S>&, const MLP<S>&, const MLP<S>&, const MLP<S>&, double, \
                                double, const MatT<S>&, MLP<S>*);                                                    \
  template double actor_grad<S>(const Batch<S>&, const MLP<S>&, const MLP<S>&, const MLP<S>&, double, double,        \
                                const MatT<S>&, MLP<S>*, ActorEstimator);                                            \
  template RSACGradients<S> compute_gradients<S>(const RSACNetworks<S>&, const Batch<S>&, const MatT<S>&,            \
                                                 const RSACConfig&);                                                 \
  template RSACGradients<S> rsac_update<S>(RSACNetworks<S>&, RSACOptimizers<S>&, const Batch<S>&, const MatT<S>&,    \
                                           const RSACConfig&);                                                       \
  template std::vector<double> policy_action<S>(const MLP<S>&, std::span<const double>, Rng*);                       \
  template Batch<S> ReplayBuffer::sample<S>(int, Rng&) const;

RISKCTL_INSTANTIATE(float)
RISKCTL_INSTANTIATE(double)

template RSACNetworks<double> RSACNetworks<float>::cast<double>() const;
template RSACNetworks<float> RSACNetworks<double>::cast<float>() const;

}  // namespace riskctl
