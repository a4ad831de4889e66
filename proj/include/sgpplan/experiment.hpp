#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgpplan/sim.hpp"

namespace sgp {

enum class ExperimentKind { BoundDemo1D, FlowfieldEntropyMin, FlowfieldEntropyMax };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct BoundDemoConfig {
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  int truth_centers = 7;
  int measurements = 8;
  int grid_points = 200;
  double noise_bound = 0.1;
};

struct PlannerSettings {
  std::vector<int> horizons{1, 5, 10};
  double delta = 0.02;
  double epsilon = std::numeric_limits<double>::infinity();
  int n_controls = 8;
  int steps = 100;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::FlowfieldEntropyMin;
  std::uint64_t seed = 1;
  int trials = 20;
  std::string output_dir = "results";

  double lengthscale = 0.3;
  double signal_variance = 1.0;
  double jitter = 1e-9;
  SparseVariant variant = SparseVariant::FIC;
  /// Explicit inducing points; when empty, a uniform interior grid of `inducing_grid` points.
  PointList inducing_points;
  std::vector<int> inducing_grid{3, 3};

  PlannerSettings planner;
  DoubleGyreConfig gyre;
  double noise_bound = 0.05;
  std::vector<int> error_grid{30, 30};
  int truth_centers = 12;
  int snapshot_step = 40;

  BoundDemoConfig bound_demo;

  void validate() const;
};

/// Parses a config, filling unspecified keys with the defaults for its experiment kind.
/// Throws std::invalid_argument on schema violations.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a hash (hex) of the resolved config; binds every emitted table to its config.
std::string config_hash(const ExperimentConfig& cfg);

KernelSpec base_kernel_spec(const ExperimentConfig& cfg);

/// Interior grid: n points per axis at lo + (i + 1) (hi - lo) / (n + 1).
PointList interior_grid(const Box& domain, const std::vector<int>& shape);

struct Scenario {
  GroundTruth truth;
  std::shared_ptr<const InducingSet> inducing;
  Eigen::VectorXd inducing_centroid;
};

Scenario make_scenario(const ExperimentConfig& cfg);

/// Initial position of a trial, uniform in the domain.
Eigen::VectorXd initial_position(const ExperimentConfig& cfg, int trial);

struct StepRow {
  StepRecord step;
  double mean_abs_error = 0.0;
  double centroid_distance = 0.0;
};

struct TrialRecord {
  int trial = 0;
  int horizon = 0;
  bool measurement_entropy = false;
  Eigen::VectorXd initial_state;
  std::vector<StepRow> rows;
  BeliefState final_belief;
  std::optional<BeliefState> snapshot;  // belief after step cfg.snapshot_step
  std::vector<double> final_plan;
  RviStats totals;
  double wall_seconds = 0.0;
};

TrialRecord run_trial(const ExperimentConfig& cfg, const Scenario& scenario, int trial,
                      int horizon, bool measurement_entropy);

struct AggregateRow {
  int horizon = 0;
  int t = 0;
  int trials = 0;
  double error_mean = 0.0;
  double error_ci = 0.0;  // 1.96 * sample std / sqrt(trials)
  double entropy_mean = 0.0;
  double entropy_ci = 0.0;
  double centroid_distance_mean = 0.0;
};

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records);

struct FlowfieldResult {
  ExperimentConfig config;
  Scenario scenario;
  std::vector<TrialRecord> trials;  // ordered by (horizon, trial)
  std::vector<AggregateRow> aggregate;
};

/// Runs every (horizon, trial) pair of a flow-field config on a worker pool.
FlowfieldResult run_flowfield(const ExperimentConfig& cfg, bool measurement_entropy = false);
/// Same protocol with the measurement-entropy-maximisation cost.
FlowfieldResult run_baseline_comparison(const ExperimentConfig& cfg);

struct BoundDemoRow {
  double x = 0.0;
  double truth = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double bound = 0.0;
  double abs_error = 0.0;
};

struct BoundDemoResult {
  ExperimentConfig config;
  Dataset data;
  double rkhs_norm = 0.0;
  std::vector<BoundDemoRow> rows;
  int violations = 0;  // grid points with |error| > bound
  int ci_breaks = 0;   // grid points with |error| > 1 sigma
};

BoundDemoResult run_bound_demo_1d(const ExperimentConfig& cfg);

/// Evaluates the bound demo for explicit truth and data (no sampling).
BoundDemoResult evaluate_bound_demo(const ExperimentConfig& cfg, const RkhsFunction& truth,
                                    const Dataset& data);

// Tables. Every table has a header row and a leading config_hash column.
std::string format_steps_table(const ExperimentConfig& cfg, const TrialRecord& rec);
std::string format_aggregate_table(const ExperimentConfig& cfg, const std::vector<AggregateRow>& rows,
                                   bool measurement_entropy);
std::string format_field_table(const ExperimentConfig& cfg, const Scenario& scenario,
                               const BeliefState& belief);
std::string format_bound_demo_table(const BoundDemoResult& result);

void write_flowfield(const FlowfieldResult& result, const std::filesystem::path& out,
                     bool measurement_entropy);
void write_bound_demo(const BoundDemoResult& result, const std::filesystem::path& out);

/// Re-runs the trial stored in `trial_dir` and compares it with the recorded
/// steps table. Returns true when byte-identical.
bool replay_trial(const std::filesystem::path& trial_dir, std::string* message);

}  // namespace sgp
