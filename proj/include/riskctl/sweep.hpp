#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskctl/rsac.hpp"

namespace riskctl {

enum class SweepSource { Checkpoints, Train };

struct SweepConfig {
  std::vector<double> etas{-0.02, -0.01, 0.0, 0.01, 0.02};
  std::vector<double> lengths{1.0, 1.25, 1.5};
  // One trained policy per seed; each is a trial of every cell.
  std::vector<std::uint64_t> seeds{0};
  int rollouts_per_trial = 20;
  int histogram_bins = 20;
  std::uint64_t eval_seed = 12345;
  SweepSource source = SweepSource::Checkpoints;
  std::filesystem::path checkpoint_dir = "checkpoints";
  RSACConfig train;  // used with SweepSource::Train; eta and seed are overwritten per policy

  void validate() const;
};

nlohmann::json to_json(const SweepConfig& config);
SweepConfig sweep_config_from_json(const nlohmann::json& doc);

// File name a checkpoint for (eta, seed) is looked up under, e.g. "rsac_eta0.02_seed1.json".
std::string sweep_checkpoint_name(double eta, std::uint64_t seed);

struct SweepCell {
  double eta = 0.0;
  double length = 0.0;
  int num_trials = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> trial_means;  // aligned with seeds
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> episode_costs;
  std::vector<int> histogram;  // counts over SweepReport::bin_edges
};

struct SweepReport {
  std::vector<SweepCell> cells;  // eta-major, then length
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> seeds;
  int rollouts_per_trial = 0;

  // Per trained policy: mean cost at the largest length >= at the smallest.
  bool monotone_degradation() const;
  // mean(longest) - mean(shortest) per eta, in sweep order.
  std::vector<std::pair<double, double>> degradation_by_eta() const;

  std::string cells_csv() const;
  std::string trials_csv() const;
  std::string histogram_csv() const;
  nlohmann::json to_json() const;
};

// Loads (or trains) one policy per (eta, seed) and evaluates it on every
// length. Throws IoError when a checkpoint is missing. Up to `threads` policies
// are processed concurrently; the report does not depend on scheduling.
SweepReport run_sweep(const SweepConfig& config, int threads,
                      const std::function<void(const std::string&)>& progress = {});

}  // namespace riskctl
