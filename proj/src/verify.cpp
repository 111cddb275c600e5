#include "riskctl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "riskctl/duality.hpp"
#include "riskctl/errors.hpp"
#include "riskctl/io.hpp"
#include "riskctl/mdp_gen.hpp"
#include "riskctl/reinforce.hpp"
#include "riskctl/rsac.hpp"
#include "riskctl/tabular.hpp"

namespace riskctl {

bool VerifyReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json j{{"suite", suite}, {"passed", passed()}};
  auto& arr = j["checks"] = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back(
        {{"name", c.name}, {"worst", c.worst}, {"tolerance", c.tolerance}, {"cases", c.cases}, {"passed", c.passed}});
  return j;
}

std::string VerifyReport::to_csv() const {
  std::ostringstream os;
  os.precision(6);
  os << "check,worst,tolerance,cases,passed\n";
  for (const auto& c : checks)
    os << c.name << ',' << std::scientific << c.worst << ',' << c.tolerance << ',' << c.cases << ','
       << (c.passed ? "true" : "false") << '\n';
  return os.str();
}

std::string to_string(VerifySuite suite) {
  switch (suite) {
    case VerifySuite::Duality: return "duality";
    case VerifySuite::DpOracle: return "dp-oracle";
    case VerifySuite::PgOracle: return "pg-oracle";
    case VerifySuite::RsacGrad: return "rsac-grad";
  }
  return "unknown";
}

VerifySuite verify_suite_from_string(const std::string& name) {
  for (auto s : {VerifySuite::Duality, VerifySuite::DpOracle, VerifySuite::PgOracle, VerifySuite::RsacGrad})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown verify suite '" + name + "' (duality | dp-oracle | pg-oracle | rsac-grad)");
}

double VerifyConfig::effective_tolerance() const {
  if (tolerance) return *tolerance;
  switch (suite) {
    case VerifySuite::Duality:
    case VerifySuite::DpOracle: return 1e-10;
    case VerifySuite::PgOracle: return 1e-6;
    case VerifySuite::RsacGrad: return 1e-4;
  }
  return 0.0;
}

void VerifyConfig::validate() const {
  if (tolerance && !(*tolerance >= 0.0)) throw ConfigError("tolerance must be non-negative");
  if (num_cases < 1) throw ConfigError("num_cases must be >= 1");
}

VerifyConfig verify_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("verify config must be an object");
  VerifyConfig c;
  try {
    for (const auto& [key, val] : doc.items()) {
      if (key == "suite") c.suite = verify_suite_from_string(val.get<std::string>());
      else if (key == "seed") c.seed = val.get<std::uint64_t>();
      else if (key == "num_cases") c.num_cases = val.get<int>();
      else if (key == "tolerance") c.tolerance = val.get<double>();
      else if (key == "etas") c.etas = val.get<std::vector<double>>();
      else if (key == "mdp_paths") c.mdp_paths = val.get<std::vector<std::string>>();
      else throw ConfigError("unknown verify config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed verify config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

CheckResult make_check(std::string name, double worst, double tol, int cases) {
  return {std::move(name), worst, tol, cases, std::isfinite(worst) && worst <= tol};
}

std::vector<double> random_vector(Rng& rng, int n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<double> random_simplex(Rng& rng, int n) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (auto& x : w) sum += (x = -std::log(1.0 - rng.uniform()));
  for (auto& x : w) x /= sum;
  double rest = 1.0;
  for (int i = 0; i + 1 < n; ++i) rest -= w[i];
  w[n - 1] = std::max(rest, 0.0);
  return w;
}

// Random fixtures of at most 3 states, 3 actions and horizon 3, then any files.
std::vector<FiniteHorizonMDP> fixtures(const VerifyConfig& config) {
  std::vector<FiniteHorizonMDP> out;
  Rng root(config.seed);
  for (int i = 0; i < config.num_cases; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i));
    RandomMdpOptions o;
    o.num_states = 1 + static_cast<int>(rng.index(3));
    o.num_actions = 1 + static_cast<int>(rng.index(3));
    o.horizon = 1 + static_cast<int>(rng.index(3));
    out.push_back(random_mdp(rng, o));
  }
  for (const auto& p : config.mdp_paths) out.push_back(load_mdp(p));
  return out;
}

}  // namespace

VerifyReport verify_duality_suite(const VerifyConfig& config) {
  const double tol = config.effective_tolerance();
  Rng root(config.seed);
  const int tuples = std::max(config.num_cases, 1000);
  double worst_ineq = 0.0;
  double worst_eq = 0.0;
  double worst_sup_ineq = 0.0;
  double worst_sup_eq = 0.0;
  for (int i = 0; i < tuples; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i));
    const int n = 2 + static_cast<int>(rng.index(4));
    const auto g = random_vector(rng, n, -2.0, 2.0);
    double beta = rng.uniform(-3.0, 3.0);
    double gamma = beta + rng.uniform(0.1, 3.0);
    if (std::abs(beta) < 1e-3) beta = 1e-3;
    if (std::abs(gamma) < 1e-3) gamma += 0.5;
    const FiniteDensity rho(random_simplex(rng, n));
    const double lhs = dual_lhs(g, beta);
    worst_ineq = std::max(worst_ineq, lhs - dual_rhs(g, rho, beta, gamma));
    worst_eq = std::max(worst_eq, std::abs(dual_rhs(g, closed_form_minimizer(g, beta, gamma), beta, gamma) - lhs));
    std::vector<double> h(g.size());
    std::transform(g.begin(), g.end(), h.begin(), [](double v) { return -v; });
    const double sup_lhs = dual_sup_lhs(h, gamma);
    worst_sup_ineq = std::max(worst_sup_ineq, dual_sup_rhs(h, rho, beta, gamma) - sup_lhs);
    worst_sup_eq =
        std::max(worst_sup_eq, std::abs(dual_sup_rhs(h, closed_form_maximizer(h, beta, gamma), beta, gamma) - sup_lhs));
  }
  VerifyReport r;
  r.suite = "duality";
  r.checks.push_back(make_check("inf_inequality", worst_ineq, tol, tuples));
  r.checks.push_back(make_check("inf_equality_at_minimizer", worst_eq, tol, tuples));
  r.checks.push_back(make_check("sup_inequality", worst_sup_ineq, tol, tuples));
  r.checks.push_back(make_check("sup_equality_at_maximizer", worst_sup_eq, tol, tuples));

  // n = 2 grid at resolution 1e-3: argmin within one cell.
  Rng grid_rng = root.derive(0x9e1d);
  double worst_cell = 0.0;
  bool grid_ok = true;
  const int grids = 5;
  for (int i = 0; i < grids; ++i) {
    const auto g = random_vector(grid_rng, 2, -2.0, 2.0);
    const double beta = grid_rng.uniform(0.2, 2.0);
    const double gamma = beta + grid_rng.uniform(0.2, 2.0);
    try {
      const auto rep = verify_duality_grid(g, beta, gamma, 1e-3);
      worst_cell = std::max({worst_cell, rep.inf_argmin_distance / rep.resolution,
                             rep.sup_argmax_distance / rep.resolution});
      grid_ok = grid_ok && rep.passed(tol);
    } catch (const GridTooCoarse&) {
      grid_ok = false;
    }
  }
  auto grid = make_check("grid_argmin_cells_n2", worst_cell, 1.0, grids);
  grid.passed = grid.passed && grid_ok;
  r.checks.push_back(grid);
  return r;
}

VerifyReport verify_dp_oracle_suite(const VerifyConfig& config) {
  const double tol = config.effective_tolerance();
  const auto mdps = fixtures(config);
  const std::vector<double> lp_etas = config.etas.value_or(std::vector<double>{-0.9, -0.5, 0.5, 2.0});
  const std::vector<double> renyi_etas = config.etas.value_or(std::vector<double>{-0.5, 0.5});
  double worst_lp = 0.0;
  double worst_renyi = 0.0;
  int lp_cases = 0;
  int renyi_cases = 0;
  for (const auto& mdp : mdps) {
    for (double eta : lp_etas) {
      const RiskParams p{eta, 1.0};
      const auto sol = solve_lp(mdp, p);
      const double exact = evaluate_objective_exact(mdp, sol.policy, p, ObjectiveKind::LP);
      worst_lp = std::max(worst_lp, std::abs(sol.initial_value - exact));
      ++lp_cases;
    }
    for (double eta : renyi_etas) {
      const RiskParams p{eta, 1.0};
      const auto sol = solve_renyi(mdp, p);
      const double exact = evaluate_objective_exact(mdp, sol.policy, p, ObjectiveKind::Renyi);
      worst_renyi = std::max(worst_renyi, std::abs(sol.initial_value - exact));
      ++renyi_cases;
    }
  }
  VerifyReport r;
  r.suite = "dp-oracle";
  r.checks.push_back(make_check("lp_value_vs_exact", worst_lp, tol, lp_cases));
  r.checks.push_back(make_check("renyi_value_vs_exact", worst_renyi, tol, renyi_cases));
  return r;
}

VerifyReport verify_pg_oracle_suite(const VerifyConfig& config) {
  const double tol = config.effective_tolerance();
  const auto mdps = fixtures(config);
  const std::vector<double> etas = config.etas.value_or(std::vector<double>{-0.5, 0.5, 1.0});
  Rng root = Rng(config.seed).derive(0x96);
  double worst_fd = 0.0;
  double worst_baseline = 0.0;
  int cases = 0;
  for (std::size_t i = 0; i < mdps.size(); ++i) {
    const auto& mdp = mdps[i];
    Rng rng = root.derive(i);
    SoftmaxPolicyParams params(mdp.num_states(), mdp.num_actions());
    for (auto& l : params.logits) l = rng.normal();
    std::vector<double> bvals(static_cast<std::size_t>(mdp.horizon()) * mdp.num_states());
    for (auto& b : bvals) b = rng.uniform(-2.0, 2.0);
    const Baseline baseline = [&](int t, int x) { return bvals[static_cast<std::size_t>(t) * mdp.num_states() + x]; };
    for (double eta : etas) {
      const auto g = exact_gradient_oracle(mdp, params, eta);
      const auto gb = exact_gradient_oracle(mdp, params, eta, baseline);
      // Central differences of J / eta.
      const double h = 1e-5;
      std::vector<double> fd(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) {
        auto p = params;
        p.logits[k] += h;
        const double up = exact_exponential_objective(mdp, p, eta) / eta;
        p.logits[k] -= 2.0 * h;
        const double dn = exact_exponential_objective(mdp, p, eta) / eta;
        fd[k] = (up - dn) / (2.0 * h);
      }
      double err = 0.0;
      double scale = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        err = std::max(err, std::abs(g[k] - fd[k]));
        scale = std::max(scale, std::abs(fd[k]));
        worst_baseline = std::max(worst_baseline, std::abs(g[k] - gb[k]));
      }
      worst_fd = std::max(worst_fd, err / std::max(scale, 1e-8));
      ++cases;
    }
  }
  VerifyReport r;
  r.suite = "pg-oracle";
  r.checks.push_back(make_check("exact_gradient_vs_fd_relative", worst_fd, tol, cases));
  r.checks.push_back(make_check("baseline_invariance", worst_baseline, 1e-10, cases));
  return r;
}

namespace {

using MatD = MLP<double>::Mat;

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

template <class Loss>
std::vector<double> fd_gradient(MLP<double>& net, Loss&& loss) {
  auto p = net.flatten();
  std::vector<double> g(p.size());
  const double h = 1e-6;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double keep = p[k];
    p[k] = keep + h;
    net.unflatten(p);
    const double up = loss();
    p[k] = keep - h;
    net.unflatten(p);
    const double dn = loss();
    p[k] = keep;
    g[k] = (up - dn) / (2.0 * h);
  }
  net.unflatten(p);
  return g;
}

}  // namespace

VerifyReport verify_rsac_grad_suite(const VerifyConfig& config) {
  const double tol = config.effective_tolerance();
  const std::vector<double> etas = config.etas.value_or(std::vector<double>{-0.02, 0.0, 0.02});
  double worst_critic = 0.0;
  double worst_value = 0.0;
  double worst_actor = 0.0;
  int cases = 0;
  Rng root = Rng(config.seed).derive(0x5ac);
  const int trials = std::min(config.num_cases, 5);
  for (int trial = 0; trial < trials; ++trial) {
    for (double eta : etas) {
      Rng rng = root.derive(static_cast<std::uint64_t>(trial));
      const int obs_dim = 3;
      const int act_dim = 2;
      const int B = 16;
      auto nets = RSACNetworks<double>::init(obs_dim, act_dim, 2, 8, rng);
      nets.v_target = MLP<double>::init(nets.v.sizes(), rng);
      Batch<double> batch;
      batch.obs = MatD(obs_dim, B);
      batch.next_obs = MatD(obs_dim, B);
      batch.act = MatD(act_dim, B);
      batch.cost = MatD(1, B);
      batch.not_terminal = MatD(1, B);
      MatD xi(act_dim, B);
      for (int b = 0; b < B; ++b) {
        for (int d = 0; d < obs_dim; ++d) {
          batch.obs(d, b) = rng.uniform(-1.0, 1.0);
          batch.next_obs(d, b) = rng.uniform(-1.0, 1.0);
        }
        for (int d = 0; d < act_dim; ++d) {
          batch.act(d, b) = rng.uniform(-1.0, 1.0);
          xi(d, b) = rng.normal();
        }
        batch.cost(0, b) = rng.uniform(0.0, 3.0);
        batch.not_terminal(0, b) = rng.uniform() < 0.2 ? 0.0 : 1.0;
      }
      RSACConfig cfg;
      cfg.eta = eta;
      const auto g = compute_gradients<double>(nets, batch, xi, cfg);

      auto critic_fd = fd_gradient(nets.q1, [&] {
        return critic_grad<double>(batch, nets.q1, nets.v_target, eta, cfg.discount, nullptr);
      });
      worst_critic = std::max(worst_critic, relative_error(g.q1.flatten(), critic_fd));
      auto value_fd = fd_gradient(nets.v, [&] {
        return value_grad<double>(batch, nets.v, nets.q1, nets.q2, nets.policy, eta, cfg.alpha, xi, nullptr);
      });
      worst_value = std::max(worst_value, relative_error(g.v.flatten(), value_fd));
      auto actor_fd = fd_gradient(nets.policy, [&] {
        return actor_grad<double>(batch, nets.policy, nets.q1, nets.q2, eta, cfg.alpha, xi, nullptr);
      });
      worst_actor = std::max(worst_actor, relative_error(g.policy.flatten(), actor_fd));
      ++cases;
    }
  }
  VerifyReport r;
  r.suite = "rsac-grad";
  r.checks.push_back(make_check("critic_grad_vs_fd_relative", worst_critic, tol, cases));
  r.checks.push_back(make_check("value_grad_vs_fd_relative", worst_value, tol, cases));
  r.checks.push_back(make_check("actor_grad_vs_fd_relative", worst_actor, tol, cases));
  return r;
}

VerifyReport run_verify(const VerifyConfig& config) {
  config.validate();
  switch (config.suite) {
    case VerifySuite::Duality: return verify_duality_suite(config);
    case VerifySuite::DpOracle: return verify_dp_oracle_suite(config);
    case VerifySuite::PgOracle: return verify_pg_oracle_suite(config);
    case VerifySuite::RsacGrad: return verify_rsac_grad_suite(config);
  }
  throw ConfigError("unknown verify suite");
}

}  // namespace riskctl
