#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "htbandit/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Heavy-tailed multi-armed bandit lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  bool diagnostics = false;

  auto* check = app.add_subcommand("check-env", "Verify the environment assumptions of a config");
  check->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--reps", reps, "Repetitions per horizon (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Base seed (overrides the config)");
  };
  auto* run = app.add_subcommand("run", "Simulate and write regret.csv");
  add_run_flags(run);
  run->add_flag("--diagnostics", diagnostics, "Also write per-round diagnostics (uniinf only)");
  auto* sweep = app.add_subcommand("sweep", "Fit regret scaling across horizons");
  add_run_flags(sweep);

  std::string rounds_path;
  std::size_t arms = 0;
  std::size_t horizon = 0;
  std::string audit_config;
  auto* audit = app.add_subcommand("audit", "Replay a diagnostics file through the per-round bound checks");
  audit->add_option("--rounds", rounds_path, "rounds_<T>_<rep>.csv file")->required();
  audit->add_option("--arms", arms, "Number of arms (default: from the file comment)");
  audit->add_option("--horizon", horizon, "Horizon T (default: from the file comment)");
  audit->add_option("--config", audit_config, "Config to compare digests against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : htbandit::kExitIo;
  }

  htbandit::Overrides overrides;
  if (!out_dir.empty()) overrides.output_dir = out_dir;
  if (reps > 0) overrides.reps = reps;
  if ((run->parsed() && run->count("--seed")) || (sweep->parsed() && sweep->count("--seed"))) overrides.seed = seed;
  overrides.diagnostics = diagnostics;

  if (check->parsed()) return htbandit::cmd_check_env(config_path, std::cout, std::cerr);
  if (run->parsed()) return htbandit::cmd_run(config_path, overrides, std::cout, std::cerr);
  if (sweep->parsed()) return htbandit::cmd_sweep(config_path, overrides, std::cout, std::cerr);
  std::optional<std::size_t> k = arms ? std::optional<std::size_t>(arms) : std::nullopt;
  std::optional<std::size_t> t = horizon ? std::optional<std::size_t>(horizon) : std::nullopt;
  std::optional<std::string> cfg = audit_config.empty() ? std::nullopt : std::optional<std::string>(audit_config);
  return htbandit::cmd_audit(rounds_path, k, t, cfg, std::cout, std::cerr);
}
