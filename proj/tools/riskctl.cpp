#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace riskctl::cli;
#if defined(__GLIBC__)
  // Network temporaries exceed the default mmap threshold; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif

  CLI::App app{"riskctl: risk-sensitive control toolkit"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::uint64_t seed = 0;
  std::string config;
  std::string out = "out";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config document")->required();
    sub->add_option("--seed", seed, "override the seed recorded in the config");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_flag("--override-eta-guard", opts.override_eta_guard,
                  "allow RSAC training with |eta| beyond the stable range");
  };

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const nlohmann::json&, const CommonOptions&);
  };
  const Entry entries[] = {
      {"solve", "solve a tabular MDP or LQG problem", cmd_solve},
      {"verify", "run a verification suite (duality | dp-oracle | pg-oracle | rsac-grad)", cmd_verify},
      {"train", "train REINFORCE on an MDP or RSAC on the pendulum", cmd_train},
      {"sweep", "evaluate RSAC policies over an eta x pole-length grid", cmd_sweep},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    subs.emplace_back(sub, &e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigInvalid;
  }

  opts.config = config;
  opts.out = out;
  for (const auto& [sub, entry] : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed") > 0) opts.seed = seed;
    return run_command(entry->name, entry->fn, opts);
  }
  return kConfigInvalid;
}
