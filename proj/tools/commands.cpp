#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

#include "riskctl/errors.hpp"
#include "riskctl/io.hpp"
#include "riskctl/lqg.hpp"
#include "riskctl/mdp_gen.hpp"
#include "riskctl/reinforce.hpp"
#include "riskctl/rsac.hpp"
#include "riskctl/sweep.hpp"
#include "riskctl/tabular.hpp"
#include "riskctl/verify.hpp"

namespace riskctl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Small schema helper: every key must be consumed, otherwise ConfigError.
class Fields {
 public:
  Fields(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.push_back(key);
    return doc_.contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json& raw(const std::string& key) {
    seen_.push_back(key);
    return doc_.at(key);
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw ConfigError("unknown key '" + key + "' in " + where_);
  }

 private:
  const json& doc_;
  std::string where_;
  std::vector<std::string> seen_;
};

fs::path resolve(const CommonOptions& opts, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || opts.config.empty()) return path;
  return opts.config.parent_path() / path;
}

FiniteHorizonMDP load_model(const json& doc, const std::string& where, const CommonOptions& opts,
                            std::uint64_t* seed_used) {
  Fields f(doc, where);
  FiniteHorizonMDP mdp = [&] {
    if (f.has("mdp_path")) {
      if (doc.contains("generator")) throw ConfigError(where + ": give either mdp_path or generator");
      try {
        return load_mdp(resolve(opts, f.get<std::string>("mdp_path", "")));
      } catch (const InvalidModel& e) {
        throw ConfigError(std::string("invalid MDP file: ") + e.what());
      }
    }
    if (!f.has("generator")) throw ConfigError(where + " needs mdp_path or generator");
    Fields g(f.raw("generator"), where + ".generator");
    RandomMdpOptions o;
    std::uint64_t seed = g.get<std::uint64_t>("seed", 0);
    if (opts.seed) seed = *opts.seed;
    o.num_states = g.get<int>("num_states", 2);
    o.num_actions = g.get<int>("num_actions", 2);
    o.horizon = g.get<int>("horizon", 2);
    o.deterministic = g.get<bool>("deterministic", false);
    o.single_initial_state = g.get<bool>("single_initial_state", false);
    o.cost_scale = g.get<double>("cost_scale", 1.0);
    o.terminal_cost_scale = g.get<double>("terminal_cost_scale", 1.0);
    g.finish();
    if (seed_used) *seed_used = seed;
    Rng rng(seed);
    try {
      return random_mdp(rng, o);
    } catch (const InvalidModel& e) {
      throw ConfigError(std::string("invalid generator options: ") + e.what());
    }
  }();
  return mdp;
}

PendulumConfig pendulum_from_json(const json& doc) {
  Fields f(doc, "pendulum");
  PendulumConfig c;
  c.gravity = f.get("gravity", c.gravity);
  c.mass = f.get("mass", c.mass);
  c.length = f.get("length", c.length);
  c.dt = f.get("dt", c.dt);
  c.max_torque = f.get("max_torque", c.max_torque);
  c.max_speed = f.get("max_speed", c.max_speed);
  c.episode_length = f.get("episode_length", c.episode_length);
  f.finish();
  try {
    c.validate();
  } catch (const InvalidModel& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json pendulum_to_json(const PendulumConfig& c) {
  return {{"gravity", c.gravity}, {"mass", c.mass},           {"length", c.length},
          {"dt", c.dt},           {"max_torque", c.max_torque}, {"max_speed", c.max_speed},
          {"episode_length", c.episode_length}};
}

std::string mdp_summary_csv(const SolveResult& r) {
  std::ostringstream os;
  os.precision(12);
  os << "t,state,value,best_action,best_prob\n";
  for (int t = 0; t < r.values.horizon(); ++t)
    for (int x = 0; x < r.values.num_states(); ++x) {
      const auto row = r.policy.row(t, x);
      const auto best = std::max_element(row.begin(), row.end());
      os << t << ',' << x << ',' << r.values.V(t, x) << ',' << (best - row.begin()) << ',' << *best << '\n';
    }
  return os.str();
}

int solve_mdp(Fields& f, const json& config, const CommonOptions& opts) {
  const std::string solver = f.get<std::string>("solver", "lp");
  const RiskParams params{f.get<double>("eta", 0.0), f.get<double>("epsilon", 1.0)};
  std::uint64_t seed = 0;
  json model_doc = json::object();
  for (const char* key : {"mdp_path", "generator"})
    if (f.has(key)) model_doc[key] = config.at(key);
  f.finish();
  const auto mdp = load_model(model_doc, "solve", opts, &seed);

  SolveResult result = [&] {
    if (solver == "lp") return solve_lp(mdp, params);
    if (solver == "renyi") return solve_renyi(mdp, params);
    if (solver == "maxent") return solve_maxent(mdp, params.epsilon);
    if (solver == "cai_posterior") return solve_cai_posterior(mdp);
    throw ConfigError("solver must be lp, renyi, maxent or cai_posterior");
  }();
  const bool generated = model_doc.contains("generator");
  save_json(opts.out / "solve_result.json", to_json(result, generated ? std::optional(seed) : std::nullopt));
  save_text(opts.out / "summary.csv", mdp_summary_csv(result));
  std::cout << "solver=" << to_string(result.kind) << " eta=" << params.eta << " epsilon=" << params.epsilon
            << " initial_value=" << result.initial_value << "\n";
  return kOk;
}

int solve_lqg(Fields& f, const json& config, const CommonOptions& opts) {
  const double eta = f.get<double>("eta", 0.0);
  const int rollouts = f.get<int>("mc_rollouts", 0);
  const std::uint64_t seed = opts.seed.value_or(f.get<std::uint64_t>("seed", 0));
  LQGModel model;
  try {
    if (f.has("lqg_path")) model = lqg_from_json(load_json(resolve(opts, config.at("lqg_path").get<std::string>())));
    else if (f.has("lqg")) model = lqg_from_json(config.at("lqg"));
    else throw ConfigError("LQG solve needs lqg_path or lqg");
  } catch (const InvalidModel& e) {
    throw ConfigError(std::string("invalid LQG model: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid LQG model: ") + e.what());
  }
  f.finish();
  if (rollouts < 0) throw ConfigError("mc_rollouts must be >= 0");
  try {
    model.validate();
  } catch (const InvalidModel& e) {
    throw ConfigError(std::string("invalid LQG model: ") + e.what());
  }
  const auto sol = solve_riccati(model, eta);
  json out = to_json(sol);
  std::ostringstream os;
  os.precision(12);
  os << "t,trace_Pi,gain_norm\n";
  for (std::size_t t = 0; t < sol.Pi.size(); ++t)
    os << t << ',' << sol.Pi[t].trace() << ',' << (t < sol.K.size() ? sol.K[t].norm() : 0.0) << '\n';
  if (rollouts > 0) {
    Rng rng(seed);
    const auto est = mc_objective_estimate(model, sol, eta, rollouts, rng);
    out["mc_objective"] = {{"value", est.value}, {"std_error", est.std_error}, {"rollouts", est.num_rollouts}, {"seed", seed}};
    std::cout << "mc_objective=" << est.value << " +- " << est.std_error << "\n";
  }
  save_json(opts.out / "riccati.json", out);
  save_text(opts.out / "summary.csv", os.str());
  std::cout << "riccati eta=" << eta << " horizon=" << model.horizon << " trace(Pi_0)=" << sol.Pi.front().trace()
            << "\n";
  return kOk;
}

}  // namespace

int thread_cap() {
  if (const char* env = std::getenv("RISKCTL_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError("RISKCTL_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_solve(const json& config, const CommonOptions& opts) {
  Fields f(config, "solve config");
  const std::string problem = f.get<std::string>("problem", "mdp");
  if (problem == "mdp") return solve_mdp(f, config, opts);
  if (problem == "lqg") return solve_lqg(f, config, opts);
  throw ConfigError("problem must be 'mdp' or 'lqg'");
}

int cmd_verify(const json& config, const CommonOptions& opts) {
  auto vc = verify_config_from_json(config);
  if (opts.seed) vc.seed = *opts.seed;
  const auto report = run_verify(vc);
  auto doc = report.to_json();
  doc["seed"] = vc.seed;
  doc["num_cases"] = vc.num_cases;
  save_json(opts.out / "verify_report.json", doc);
  save_text(opts.out / "verify_report.csv", report.to_csv());
  for (const auto& c : report.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << report.suite << '/' << c.name << " worst=" << c.worst
              << " tol=" << c.tolerance << "\n";
  return report.passed() ? kOk : kVerifyFailed;
}

namespace {

int train_rsac(Fields& f, const CommonOptions& opts) {
  RSACConfig rc = f.has("rsac") ? rsac_config_from_json(f.raw("rsac")) : RSACConfig{};
  const PendulumConfig pc = f.has("pendulum") ? pendulum_from_json(f.raw("pendulum")) : PendulumConfig{};
  const int final_episodes = f.get<int>("final_eval_episodes", 100);
  const std::string env_name = f.get<std::string>("env", "pendulum");
  f.finish();
  if (env_name != "pendulum") throw ConfigError("rsac supports env 'pendulum' only");
  if (final_episodes < 1) throw ConfigError("final_eval_episodes must be >= 1");
  if (opts.seed) rc.seed = *opts.seed;
  if (opts.override_eta_guard) rc.override_eta_guard = true;
  if (rc.override_eta_guard && std::abs(rc.eta) > RSACConfig::kEtaGuard)
    std::cerr << "warning: |eta| = " << std::abs(rc.eta)
              << " is beyond the stable range 0.03; training is expected to diverge\n";

  const auto result = train([&] { return std::make_unique<PendulumEnv>(pc); }, pc.max_torque, rc);
  const auto ckpt_path = opts.out / sweep_checkpoint_name(rc.eta, rc.seed);
  save_json(ckpt_path, checkpoint_to_json(result.agent, rc, result.steps_completed));
  save_text(opts.out / "train_log.csv", result.log.to_csv());

  json run{{"algorithm", "rsac"},
           {"config", to_json(rc)},
           {"pendulum", pendulum_to_json(pc)},
           {"seed", rc.seed},
           {"steps_completed", result.steps_completed},
           {"checkpoint", ckpt_path.filename().string()}};
  if (result.status == TrainStatus::NonFinite) {
    run["status"] = "non_finite";
    run["message"] = result.message;
    save_json(opts.out / "run.json", run);
    std::cerr << "error: " << result.message << " (last good checkpoint written to " << ckpt_path.string() << ")\n";
    return kSolverError;
  }
  PendulumEnv env(pc);
  Rng eval_rng = Rng(rc.seed).derive(0xe7a1);
  Rng random_rng = Rng(rc.seed).derive(0xe7a1);
  const auto eval = evaluate_policy(result.agent.policy, env, final_episodes, pc.max_torque, eval_rng);
  const auto random = evaluate_random(env, final_episodes, pc.max_torque, random_rng);
  run["status"] = "completed";
  run["final_eval"] = {{"episodes", final_episodes}, {"mean_cost", eval.mean}, {"random_mean_cost", random.mean}};
  save_json(opts.out / "run.json", run);
  std::cout << "rsac eta=" << rc.eta << " seed=" << rc.seed << " steps=" << result.steps_completed
            << " eval_cost=" << eval.mean << " random_cost=" << random.mean << "\n";
  return kOk;
}

int train_pg(Fields& f, const json& config, const CommonOptions& opts) {
  Fields r(config.at("reinforce"), "reinforce");
  f.raw("reinforce");
  f.finish();
  json model_doc = json::object();
  for (const char* key : {"mdp_path", "generator"})
    if (r.has(key)) model_doc[key] = config.at("reinforce").at(key);
  const double eta = r.get<double>("eta", 0.5);
  ReinforceConfig rc;
  rc.lr = r.get("lr", rc.lr);
  rc.batch = r.get("batch", rc.batch);
  rc.iters = r.get("iters", rc.iters);
  const std::string baseline = r.get<std::string>("baseline", "mean_return");
  const double init_logit = r.get<double>("init_logit", 0.0);
  std::uint64_t seed = r.get<std::uint64_t>("seed", 0);
  r.finish();
  if (baseline == "none") rc.baseline_mode = BaselineMode::None;
  else if (baseline == "mean_return") rc.baseline_mode = BaselineMode::MeanReturn;
  else throw ConfigError("baseline must be 'none' or 'mean_return'");
  if (opts.seed) seed = *opts.seed;
  std::uint64_t gen_seed = 0;
  const auto mdp = load_model(model_doc, "reinforce", opts, &gen_seed);

  Rng rng(seed);
  const SoftmaxPolicyParams init(mdp.num_states(), mdp.num_actions(), init_logit);
  const auto result = train_reinforce(mdp, init, eta, rc, rng);
  const double exact = evaluate_objective_exact(mdp, result.params.as_tabular(mdp.horizon()), RiskParams{eta, 1.0},
                                                ObjectiveKind::LP);
  const auto optimum = solve_lp(mdp, RiskParams{eta, 1.0});
  save_text(opts.out / "train_log.csv", result.log.to_csv());
  save_json(opts.out / "params.json", {{"num_states", result.params.num_states},
                                       {"num_actions", result.params.num_actions},
                                       {"logits", result.params.logits}});
  save_json(opts.out / "run.json", {{"algorithm", "reinforce"},
                                    {"eta", eta},
                                    {"seed", seed},
                                    {"lr", rc.lr},
                                    {"batch", rc.batch},
                                    {"iters", rc.iters},
                                    {"baseline", baseline},
                                    {"final_exact_objective", exact},
                                    {"optimal_objective", optimum.initial_value}});
  std::cout << "reinforce eta=" << eta << " final_objective=" << exact << " optimum=" << optimum.initial_value << "\n";
  return kOk;
}

}  // namespace

int cmd_train(const json& config, const CommonOptions& opts) {
  Fields f(config, "train config");
  const std::string algorithm = f.get<std::string>("algorithm", "rsac");
  if (algorithm == "rsac") return train_rsac(f, opts);
  if (algorithm == "reinforce") {
    if (!config.contains("reinforce")) throw ConfigError("reinforce training needs a 'reinforce' block");
    return train_pg(f, config, opts);
  }
  throw ConfigError("algorithm must be 'rsac' or 'reinforce'");
}

int cmd_sweep(const json& config, const CommonOptions& opts) {
  auto sc = sweep_config_from_json(config);
  if (config.contains("checkpoint_dir")) sc.checkpoint_dir = resolve(opts, sc.checkpoint_dir.string());
  if (opts.seed) sc.eval_seed = *opts.seed;
  if (opts.override_eta_guard) sc.train.override_eta_guard = true;
  const auto report = run_sweep(sc, thread_cap(), [](const std::string& msg) { std::cerr << msg << "\n"; });
  auto doc = report.to_json();
  doc["config"] = to_json(sc);
  save_json(opts.out / "sweep_report.json", doc);
  save_text(opts.out / "sweep_cells.csv", report.cells_csv());
  save_text(opts.out / "sweep_trials.csv", report.trials_csv());
  save_text(opts.out / "sweep_histogram.csv", report.histogram_csv());
  std::cout << "sweep cells=" << report.cells.size()
            << " monotone_degradation=" << (report.monotone_degradation() ? "yes" : "no") << "\n";
  for (const auto& [eta, d] : report.degradation_by_eta())
    std::cout << "  eta=" << eta << " degradation=" << d << "\n";
  return kOk;
}

int run_command(const char* name, int (*command)(const json&, const CommonOptions&), const CommonOptions& opts) {
  try {
    const json config = load_json(opts.config);
    return command(config, opts);
  } catch (const ConfigError& e) {
    std::cerr << name << ": config error: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const InvalidModel& e) {
    std::cerr << name << ": invalid model: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const IoError& e) {
    std::cerr << name << ": I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const InvalidRisk& e) {
    std::cerr << name << ": InvalidRisk: " << e.what() << "\n";
    return kSolverError;
  } catch (const NeuroticBreakdown& e) {
    std::cerr << name << ": NeuroticBreakdown: " << e.what() << "\n";
    return kSolverError;
  } catch (const Error& e) {
    std::cerr << name << ": solver error: " << e.what() << "\n";
    return kSolverError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << name << ": I/O error: " << e.what() << "\n";
    return kIoError;
  }
}

}  // namespace riskctl::cli
