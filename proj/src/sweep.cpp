#include "riskctl/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "riskctl/errors.hpp"
#include "riskctl/io.hpp"

namespace riskctl {

void SweepConfig::validate() const {
  if (etas.empty() || lengths.empty() || seeds.empty()) throw ConfigError("sweep needs etas, lengths and seeds");
  for (double l : lengths)
    if (!(l > 0.0)) throw ConfigError("pendulum lengths must be positive");
  if (rollouts_per_trial < 1) throw ConfigError("rollouts_per_trial must be >= 1");
  if (histogram_bins < 1) throw ConfigError("histogram_bins must be >= 1");
  if (source == SweepSource::Train) {
    for (double eta : etas) {
      RSACConfig c = train;
      c.eta = eta;
      c.validate();
    }
  }
}

nlohmann::json to_json(const SweepConfig& c) {
  return nlohmann::json{{"etas", c.etas},
                        {"lengths", c.lengths},
                        {"seeds", c.seeds},
                        {"rollouts_per_trial", c.rollouts_per_trial},
                        {"histogram_bins", c.histogram_bins},
                        {"eval_seed", c.eval_seed},
                        {"source", c.source == SweepSource::Train ? "train" : "checkpoints"},
                        {"checkpoint_dir", c.checkpoint_dir.string()},
                        {"train", to_json(c.train)}};
}

SweepConfig sweep_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("sweep config must be an object");
  SweepConfig c;
  try {
    for (const auto& [key, val] : doc.items()) {
      if (key == "etas") c.etas = val.get<std::vector<double>>();
      else if (key == "lengths") c.lengths = val.get<std::vector<double>>();
      else if (key == "seeds") c.seeds = val.get<std::vector<std::uint64_t>>();
      else if (key == "rollouts_per_trial") c.rollouts_per_trial = val.get<int>();
      else if (key == "histogram_bins") c.histogram_bins = val.get<int>();
      else if (key == "eval_seed") c.eval_seed = val.get<std::uint64_t>();
      else if (key == "checkpoint_dir") c.checkpoint_dir = val.get<std::string>();
      else if (key == "train") c.train = rsac_config_from_json(val);
      else if (key == "source") {
        const auto s = val.get<std::string>();
        if (s == "checkpoints") c.source = SweepSource::Checkpoints;
        else if (s == "train") c.source = SweepSource::Train;
        else throw ConfigError("sweep source must be 'checkpoints' or 'train'");
      } else {
        throw ConfigError("unknown sweep config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sweep config: ") + e.what());
  }
  return c;
}

std::string sweep_checkpoint_name(double eta, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "rsac_eta%g_seed%llu.json", eta, static_cast<unsigned long long>(seed));
  return buf;
}

bool SweepReport::monotone_degradation() const {
  if (cells.empty()) return false;
  // Cells are eta-major; find the shortest and longest length within each eta block.
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    const SweepCell* lo = &cells[i];
    const SweepCell* hi = &cells[i];
    for (; j < cells.size() && cells[j].eta == cells[i].eta; ++j) {
      if (cells[j].length < lo->length) lo = &cells[j];
      if (cells[j].length > hi->length) hi = &cells[j];
    }
    for (std::size_t k = 0; k < lo->trial_means.size(); ++k)
      if (hi->trial_means[k] < lo->trial_means[k]) return false;
    i = j;
  }
  return true;
}

std::vector<std::pair<double, double>> SweepReport::degradation_by_eta() const {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    const SweepCell* lo = &cells[i];
    const SweepCell* hi = &cells[i];
    for (; j < cells.size() && cells[j].eta == cells[i].eta; ++j) {
      if (cells[j].length < lo->length) lo = &cells[j];
      if (cells[j].length > hi->length) hi = &cells[j];
    }
    out.emplace_back(cells[i].eta, hi->mean - lo->mean);
    i = j;
  }
  return out;
}

namespace {

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? ";" : "") + std::to_string(seeds[i]);
  return s;
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os.precision(10);
  return os;
}

}  // namespace

std::string SweepReport::cells_csv() const {
  auto os = csv_stream();
  os << "eta,length,num_trials,rollouts_per_trial,seeds,mean,min,max\n";
  for (const auto& c : cells)
    os << c.eta << ',' << c.length << ',' << c.num_trials << ',' << rollouts_per_trial << ',' << join_seeds(c.seeds)
       << ',' << c.mean << ',' << c.min << ',' << c.max << '\n';
  return os.str();
}

std::string SweepReport::trials_csv() const {
  auto os = csv_stream();
  os << "eta,length,seed,mean_cost\n";
  for (const auto& c : cells)
    for (std::size_t k = 0; k < c.seeds.size(); ++k)
      os << c.eta << ',' << c.length << ',' << c.seeds[k] << ',' << c.trial_means[k] << '\n';
  return os.str();
}

std::string SweepReport::histogram_csv() const {
  auto os = csv_stream();
  os << "eta,length,bin_lo,bin_hi,count\n";
  for (const auto& c : cells)
    for (std::size_t b = 0; b < c.histogram.size(); ++b)
      os << c.eta << ',' << c.length << ',' << bin_edges[b] << ',' << bin_edges[b + 1] << ',' << c.histogram[b] << '\n';
  return os.str();
}

nlohmann::json SweepReport::to_json() const {
  nlohmann::json j;
  j["seeds"] = seeds;
  j["rollouts_per_trial"] = rollouts_per_trial;
  j["bin_edges"] = bin_edges;
  j["monotone_degradation"] = monotone_degradation();
  auto& deg = j["degradation_by_eta"] = nlohmann::json::array();
  for (const auto& [eta, d] : degradation_by_eta()) deg.push_back({{"eta", eta}, {"degradation", d}});
  auto& arr = j["cells"] = nlohmann::json::array();
  for (const auto& c : cells)
    arr.push_back({{"eta", c.eta},
                   {"length", c.length},
                   {"num_trials", c.num_trials},
                   {"seeds", c.seeds},
                   {"trial_means", c.trial_means},
                   {"mean", c.mean},
                   {"min", c.min},
                   {"max", c.max},
                   {"histogram", c.histogram}});
  return j;
}

namespace {

MLP<Real> obtain_policy(const SweepConfig& config, double eta, std::uint64_t seed) {
  if (config.source == SweepSource::Checkpoints) {
    const auto path = config.checkpoint_dir / sweep_checkpoint_name(eta, seed);
    if (!std::filesystem::exists(path)) throw IoError("missing checkpoint " + path.string());
    return checkpoint_from_json(load_json(path)).agent.policy;
  }
  RSACConfig c = config.train;
  c.eta = eta;
  c.seed = seed;
  const auto result = train([] { return std::make_unique<PendulumEnv>(); }, PendulumConfig{}.max_torque, c);
  if (result.status != TrainStatus::Completed) throw NonFinite(result.message);
  return result.agent.policy;
}

}  // namespace

SweepReport run_sweep(const SweepConfig& config, int threads,
                      const std::function<void(const std::string&)>& progress) {
  config.validate();
  const std::size_t num_eta = config.etas.size();
  const std::size_t num_seed = config.seeds.size();
  const std::size_t num_len = config.lengths.size();

  // One job per (eta, seed) policy; results land in fixed slots.
  std::vector<RobustnessReport> results(num_eta * num_seed);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= results.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        const double eta = config.etas[job / num_seed];
        const std::size_t si = job % num_seed;
        const auto policy = obtain_policy(config, eta, config.seeds[si]);
        // Shared evaluation stream per seed index: every eta sees the same initial states.
        Rng eval_rng = Rng(config.eval_seed).derive(si);
        PendulumConfig base;
        results[job] = evaluate_robustness(policy, base, config.lengths, 1, config.rollouts_per_trial, eval_rng);
        if (progress) {
          std::lock_guard lock(mu);
          progress("eta=" + std::to_string(eta) + " seed=" + std::to_string(config.seeds[si]) + " done");
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(results.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SweepReport report;
  report.seeds = config.seeds;
  report.rollouts_per_trial = config.rollouts_per_trial;
  double hi = 0.0;
  for (std::size_t e = 0; e < num_eta; ++e)
    for (std::size_t l = 0; l < num_len; ++l) {
      SweepCell cell;
      cell.eta = config.etas[e];
      cell.length = config.lengths[l];
      cell.num_trials = static_cast<int>(num_seed);
      cell.seeds = config.seeds;
      for (std::size_t s = 0; s < num_seed; ++s) {
        const auto& summary = results[e * num_seed + s].summary[l];
        cell.trial_means.push_back(summary.mean);
        cell.episode_costs.insert(cell.episode_costs.end(), summary.episode_costs.begin(), summary.episode_costs.end());
      }
      cell.mean = 0.0;
      for (double m : cell.trial_means) cell.mean += m;
      cell.mean /= static_cast<double>(num_seed);
      cell.min = *std::min_element(cell.trial_means.begin(), cell.trial_means.end());
      cell.max = *std::max_element(cell.trial_means.begin(), cell.trial_means.end());
      for (double c : cell.episode_costs) hi = std::max(hi, c);
      report.cells.push_back(std::move(cell));
    }

  // Common bin edges on [0, largest episode cost] so cells are comparable.
  const int bins = config.histogram_bins;
  if (!(hi > 0.0)) hi = 1.0;
  for (int b = 0; b <= bins; ++b) report.bin_edges.push_back(hi * b / bins);
  for (auto& cell : report.cells) {
    cell.histogram.assign(bins, 0);
    for (double c : cell.episode_costs) {
      const int b = std::clamp(static_cast<int>(c / hi * bins), 0, bins - 1);
      ++cell.histogram[b];
    }
  }
  return report;
}

}  // namespace riskctl
