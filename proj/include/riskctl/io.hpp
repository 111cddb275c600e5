#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "riskctl/core.hpp"
#include "riskctl/tabular.hpp"

namespace riskctl {

using nlohmann::json;

// Reads and parses a JSON document. Throws IoError when the file cannot be
// read and ConfigError when it does not parse.
json load_json(const std::filesystem::path& path);
// Writes with two-space indentation, creating parent directories.
void save_json(const std::filesystem::path& path, const json& doc);
void save_text(const std::filesystem::path& path, const std::string& text);

// MDP documents, see docs/formats.md. transition and stage_cost may be given
// per time step or once for a stationary model.
json to_json(const FiniteHorizonMDP& mdp);
FiniteHorizonMDP mdp_from_json(const json& doc);
FiniteHorizonMDP load_mdp(const std::filesystem::path& path);

json to_json(const TabularPolicy& policy);
json to_json(const ValueTables& values);
json to_json(const SolveResult& result, std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace riskctl
