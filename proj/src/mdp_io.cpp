#include <fstream>
#include <sstream>

#include "riskctl/errors.hpp"
#include "riskctl/io.hpp"

namespace riskctl {

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void save_json(const std::filesystem::path& path, const json& doc) { save_text(path, doc.dump(2) + "\n"); }

json to_json(const FiniteHorizonMDP& mdp) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  const int T = mdp.horizon();
  json transition = json::array();
  json cost = json::array();
  for (int t = 0; t < T; ++t) {
    json pt = json::array();
    json ct = json::array();
    for (int x = 0; x < S; ++x) {
      json px = json::array();
      json cx = json::array();
      for (int u = 0; u < A; ++u) {
        const auto row = mdp.transition_row(t, x, u);
        px.push_back(std::vector<double>(row.begin(), row.end()));
        cx.push_back(mdp.cost(t, x, u));
      }
      pt.push_back(std::move(px));
      ct.push_back(std::move(cx));
    }
    transition.push_back(std::move(pt));
    cost.push_back(std::move(ct));
  }
  const auto init = mdp.initial_dist();
  return json{{"num_states", S},
              {"num_actions", A},
              {"horizon", T},
              {"transition", std::move(transition)},
              {"stage_cost", std::move(cost)},
              {"terminal_cost", mdp.terminal_cost_data()},
              {"initial_dist", std::vector<double>(init.begin(), init.end())}};
}

namespace {

int depth(const json& j) {
  int d = 0;
  const json* cur = &j;
  while (cur->is_array() && !cur->empty()) {
    ++d;
    cur = &(*cur)[0];
  }
  return d;
}

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) throw InvalidModel(std::string("MDP document is missing '") + key + "'");
  return doc.at(key);
}

}  // namespace

FiniteHorizonMDP mdp_from_json(const json& doc) {
  if (!doc.is_object()) throw InvalidModel("MDP document must be an object");
  static const char* kKeys[] = {"num_states", "num_actions", "horizon", "transition", "stage_cost",
                                "terminal_cost", "initial_dist"};
  for (const auto& [key, _] : doc.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) throw InvalidModel("unknown key '" + key + "' in MDP document");
  }
  try {
    const int S = require(doc, "num_states").get<int>();
    const int A = require(doc, "num_actions").get<int>();
    const int T = require(doc, "horizon").get<int>();
    if (S <= 0 || A <= 0 || T <= 0) throw InvalidModel("num_states, num_actions and horizon must be positive");
    const json& P = require(doc, "transition");
    const json& C = require(doc, "stage_cost");
    const bool p_timed = depth(P) == 4;
    const bool c_timed = depth(C) == 3;
    if (!p_timed && depth(P) != 3) throw InvalidModel("transition must be indexed [t][x][u][y] or [x][u][y]");
    if (!c_timed && depth(C) != 2) throw InvalidModel("stage_cost must be indexed [t][x][u] or [x][u]");
    if (p_timed && static_cast<int>(P.size()) != T) throw InvalidModel("transition has the wrong number of time steps");
    if (c_timed && static_cast<int>(C.size()) != T) throw InvalidModel("stage_cost has the wrong number of time steps");

    std::vector<double> transition;
    std::vector<double> cost;
    transition.reserve(static_cast<std::size_t>(T) * S * A * S);
    cost.reserve(static_cast<std::size_t>(T) * S * A);
    for (int t = 0; t < T; ++t) {
      const json& pt = p_timed ? P.at(t) : P;
      const json& ct = c_timed ? C.at(t) : C;
      if (static_cast<int>(pt.size()) != S || static_cast<int>(ct.size()) != S)
        throw InvalidModel("transition/stage_cost state dimension mismatch");
      for (int x = 0; x < S; ++x) {
        if (static_cast<int>(pt.at(x).size()) != A || static_cast<int>(ct.at(x).size()) != A)
          throw InvalidModel("transition/stage_cost action dimension mismatch");
        for (int u = 0; u < A; ++u) {
          const auto row = pt.at(x).at(u).get<std::vector<double>>();
          if (static_cast<int>(row.size()) != S) throw InvalidModel("transition row has the wrong length");
          transition.insert(transition.end(), row.begin(), row.end());
          cost.push_back(ct.at(x).at(u).get<double>());
        }
      }
    }
    auto terminal = require(doc, "terminal_cost").get<std::vector<double>>();
    auto init = require(doc, "initial_dist").get<std::vector<double>>();
    return FiniteHorizonMDP(S, A, T, std::move(transition), std::move(cost), std::move(terminal), std::move(init));
  } catch (const json::exception& e) {
    throw InvalidModel(std::string("malformed MDP document: ") + e.what());
  }
}

FiniteHorizonMDP load_mdp(const std::filesystem::path& path) { return mdp_from_json(load_json(path)); }

json to_json(const TabularPolicy& policy) {
  json out = json::array();
  for (int t = 0; t < policy.horizon(); ++t) {
    json pt = json::array();
    for (int x = 0; x < policy.num_states(); ++x) {
      const auto row = policy.row(t, x);
      pt.push_back(std::vector<double>(row.begin(), row.end()));
    }
    out.push_back(std::move(pt));
  }
  return out;
}

json to_json(const ValueTables& values) {
  json V = json::array();
  json Q = json::array();
  json logZ = json::array();
  for (int t = 0; t <= values.horizon(); ++t) {
    std::vector<double> v(values.num_states());
    for (int x = 0; x < values.num_states(); ++x) v[x] = values.V(t, x);
    V.push_back(v);
  }
  for (int t = 0; t < values.horizon(); ++t) {
    json qt = json::array();
    std::vector<double> z(values.num_states());
    for (int x = 0; x < values.num_states(); ++x) {
      const auto row = values.q_row(t, x);
      qt.push_back(std::vector<double>(row.begin(), row.end()));
      z[x] = values.log_Z(t, x);
    }
    Q.push_back(std::move(qt));
    logZ.push_back(z);
  }
  return json{{"V", std::move(V)}, {"Q", std::move(Q)}, {"log_Z", std::move(logZ)}};
}

json to_json(const SolveResult& result, std::optional<std::uint64_t> seed) {
  json out{{"kind", to_string(result.kind)},
           {"eta", result.params.eta},
           {"epsilon", result.params.epsilon},
           {"initial_value", result.initial_value},
           {"values", to_json(result.values)},
           {"policy", to_json(result.policy)}};
  out["seed"] = seed ? json(*seed) : json(nullptr);
  return out;
}

}  // namespace riskctl
