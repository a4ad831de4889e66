// sgpplan: run experiments, validate configs and replay recorded trials.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sgpplan/experiment.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitViolation = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> trials;
  std::vector<int> horizons;
};

sgp::ExperimentConfig resolve(const std::string& path, const Overrides& o) {
  sgp::ExperimentConfig cfg = sgp::load_config(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.trials) cfg.trials = *o.trials;
  if (!o.horizons.empty()) cfg.planner.horizons = o.horizons;
  cfg.validate();
  return cfg;
}

int run(const sgp::ExperimentConfig& cfg) {
  const std::filesystem::path out = cfg.output_dir;
  if (cfg.kind == sgp::ExperimentKind::BoundDemo1D) {
    const sgp::BoundDemoResult r = sgp::run_bound_demo_1d(cfg);
    sgp::write_bound_demo(r, out);
    fmt::print("bound demo: {} grid points, {} bound violations, {} points outside 1 sigma\n",
               r.rows.size(), r.violations, r.ci_breaks);
    fmt::print("wrote {}\n", out.string());
    if (r.violations > 0) {
      fmt::print(stderr, "error: worst-case bound violated at {} points\n", r.violations);
      return kExitViolation;
    }
    return 0;
  }
  const bool entropy_max = cfg.kind == sgp::ExperimentKind::FlowfieldEntropyMax;
  const sgp::FlowfieldResult r =
      entropy_max ? sgp::run_baseline_comparison(cfg) : sgp::run_flowfield(cfg);
  sgp::write_flowfield(r, out, entropy_max);
  for (const auto& a : r.aggregate) {
    if (a.t != cfg.planner.steps) continue;
    fmt::print("horizon {:2d}: final mean |error| {:.4f} +- {:.4f}, entropy {:.3f}\n", a.horizon,
               a.error_mean, a.error_ci, a.entropy_mean);
  }
  fmt::print("wrote {} trials to {}\n", r.trials.size(), out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-GP informative path planning experiments"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
  run_cmd->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", overrides.seed, "Master seed");
  run_cmd->add_option("--out", overrides.out, "Output directory");
  run_cmd->add_option("--trials", overrides.trials, "Number of trials");
  run_cmd->add_option("--horizon", overrides.horizons, "Planning horizon(s)");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config and print it resolved");
  validate_cmd->add_option("config", validate_path, "JSON config")
      ->required()
      ->check(CLI::ExistingFile);

  std::string trial_dir;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded trial and compare outputs");
  replay_cmd->add_option("trial_dir", trial_dir, "Trial directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate_cmd) {
      const sgp::ExperimentConfig cfg = sgp::load_config(validate_path);
      std::cout << sgp::config_to_json(cfg).dump(2) << "\n";
      fmt::print("config_hash {}\n", sgp::config_hash(cfg));
      return 0;
    }
    if (*replay_cmd) {
      std::string message;
      const bool ok = sgp::replay_trial(trial_dir, &message);
      fmt::print("{}: {}\n", ok ? "replay ok" : "replay FAILED", message);
      return ok ? 0 : kExitViolation;
    }
    sgp::ExperimentConfig cfg;
    try {
      cfg = resolve(config_path, overrides);
    } catch (const std::invalid_argument& e) {
      fmt::print(stderr, "error: {}\n", e.what());
      return kExitConfig;
    }
    return run(cfg);
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
}
