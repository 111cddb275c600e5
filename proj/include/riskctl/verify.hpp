#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace riskctl {

struct CheckResult {
  std::string name;
  double worst = 0.0;  // largest observed error or violation
  double tolerance = 0.0;
  int cases = 0;
  bool passed = false;
};

struct VerifyReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

enum class VerifySuite { Duality, DpOracle, PgOracle, RsacGrad };
std::string to_string(VerifySuite suite);
VerifySuite verify_suite_from_string(const std::string& name);

struct VerifyConfig {
  VerifySuite suite = VerifySuite::Duality;
  std::uint64_t seed = 0;
  int num_cases = 20;
  // Suite default when unset: duality and dp-oracle 1e-10, pg-oracle 1e-6, rsac-grad 1e-4.
  std::optional<double> tolerance;
  std::optional<std::vector<double>> etas;
  std::vector<std::string> mdp_paths;  // extra fixtures for dp-oracle and pg-oracle

  double effective_tolerance() const;
  // ConfigError on a negative tolerance or non-positive case count.
  void validate() const;
};

VerifyConfig verify_config_from_json(const nlohmann::json& doc);

// Duality inequality on random tuples, equality at the closed form, and the n = 2 grid check.
VerifyReport verify_duality_suite(const VerifyConfig& config);
// Solver value vs exhaustive objective evaluation, LP and Renyi.
VerifyReport verify_dp_oracle_suite(const VerifyConfig& config);
// Exact gradient vs central differences of the exact objective; baseline invariance.
VerifyReport verify_pg_oracle_suite(const VerifyConfig& config);
// Analytic RSAC gradients vs central differences of frozen-batch losses (double precision).
VerifyReport verify_rsac_grad_suite(const VerifyConfig& config);

VerifyReport run_verify(const VerifyConfig& config);

}  // namespace riskctl
