#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"

namespace riskctl::cli {

enum ExitCode { kOk = 0, kVerifyFailed = 1, kConfigInvalid = 2, kSolverError = 3, kIoError = 4 };

struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  bool override_eta_guard = false;
};

int cmd_solve(const nlohmann::json& config, const CommonOptions& opts);
int cmd_verify(const nlohmann::json& config, const CommonOptions& opts);
int cmd_train(const nlohmann::json& config, const CommonOptions& opts);
int cmd_sweep(const nlohmann::json& config, const CommonOptions& opts);

// Loads the config, runs the command and maps library errors onto exit codes.
int run_command(const char* name, int (*command)(const nlohmann::json&, const CommonOptions&),
                const CommonOptions& opts);

// RISKCTL_THREADS, defaulting to the hardware concurrency.
int thread_cap();

}  // namespace riskctl::cli
