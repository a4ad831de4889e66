#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgpplan/experiment.hpp"
#include "test_util.hpp"

using namespace sgp;
using nlohmann::json;
using testutil::pt;

namespace {

ExperimentConfig small_flowfield() {
  return config_from_json(json::parse(R"({
    "experiment": "flowfield_entropy_min", "seed": 4, "trials": 3,
    "planner": {"horizons": [1, 3], "steps": 8, "n_controls": 6}
  })"));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("sgpplan_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults per experiment kind") {
  const ExperimentConfig flow = config_from_json(json{{"experiment", "flowfield_entropy_min"}});
  CHECK(flow.trials == 20);
  CHECK(flow.lengthscale == 0.3);
  CHECK(flow.jitter == doctest::Approx(1e-9));
  CHECK(flow.planner.horizons == std::vector<int>{1, 5, 10});
  CHECK(flow.planner.steps == 100);
  CHECK(std::isinf(flow.planner.epsilon));
  CHECK(flow.error_grid == std::vector<int>{30, 30});
  CHECK(flow.variant == SparseVariant::FIC);

  const ExperimentConfig demo = config_from_json(json{{"experiment", "bound_demo_1d"}});
  CHECK(demo.kind == ExperimentKind::BoundDemo1D);
  CHECK(demo.lengthscale == 0.1);
  CHECK(demo.bound_demo.truth_centers == 7);
  CHECK(demo.bound_demo.grid_points == 200);

  const ExperimentConfig scaled = config_from_json(
      json{{"experiment", "flowfield_entropy_max"}, {"kernel", {{"signal_variance", 4.0}}}});
  CHECK(scaled.jitter == doctest::Approx(4e-9));
}

TEST_CASE("config schema violations") {
  CHECK_THROWS_AS(config_from_json(json::object()), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"experiment", "nope"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"experiment", "bound_demo_1d"}, {"colour", 1}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      config_from_json(json{{"experiment", "bound_demo_1d"}, {"kernel", {{"lengthscal", 1.0}}}}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      config_from_json(json{{"experiment", "flowfield_entropy_min"}, {"planner", {{"steps", "ten"}}}}),
      std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"experiment", "flowfield_entropy_min"},
                                        {"planner", {{"horizons", json::array()}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"experiment", "flowfield_entropy_min"},
                                        {"kernel", {{"variant", "vfe"}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"experiment", "flowfield_entropy_min"},
                                        {"planner", {{"epsilon", "huge"}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"experiment", "flowfield_entropy_min"},
                                        {"kernel", {{"lengthscale", -1.0}}}}),
                  std::invalid_argument);
}

TEST_CASE("config round trip and hash") {
  ExperimentConfig a = small_flowfield();
  a.planner.epsilon = 0.25;
  a.inducing_points = {pt(0.5, 0.5), pt(1.5, 0.5)};
  const ExperimentConfig b = config_from_json(config_to_json(a));
  CHECK(config_to_json(b) == config_to_json(a));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);

  ExperimentConfig c = a;
  c.output_dir = "elsewhere";
  CHECK(config_hash(c) == config_hash(a));
  c.seed += 1;
  CHECK(config_hash(c) != config_hash(a));

  const ExperimentConfig inf = small_flowfield();
  CHECK(config_to_json(inf)["planner"]["epsilon"] == "inf");
  CHECK(std::isinf(config_from_json(config_to_json(inf)).planner.epsilon));
}

TEST_CASE("interior inducing grid") {
  const Box d{pt(0.0, 0.0), pt(2.0, 1.0)};
  const PointList z = interior_grid(d, {3, 3});
  REQUIRE(z.size() == 9);
  CHECK(z[0] == pt(0.5, 0.25));
  CHECK(z[4] == pt(1.0, 0.5));
  CHECK(z[8] == pt(1.5, 0.75));
  const Scenario s = make_scenario(small_flowfield());
  CHECK((s.inducing_centroid - pt(1.0, 0.5)).norm() <= 1e-15);
}

TEST_CASE("flowfield runs are deterministic and well formed") {
  const ExperimentConfig cfg = small_flowfield();
  const FlowfieldResult a = run_flowfield(cfg);
  const FlowfieldResult b = run_flowfield(cfg);
  REQUIRE(a.trials.size() == 6);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(format_steps_table(cfg, a.trials[i]) == format_steps_table(cfg, b.trials[i]));
    CHECK(a.trials[i].rows.size() == 9);
    CHECK(a.trials[i].rows.front().step.t == 0);
    double last = INFINITY;
    for (const auto& r : a.trials[i].rows) {
      CHECK(r.step.entropy <= last + 1e-9);
      last = r.step.entropy;
      CHECK(cfg.gyre.domain.contains(r.step.state));
    }
  }
  CHECK(format_aggregate_table(cfg, a.aggregate, false) ==
        format_aggregate_table(cfg, b.aggregate, false));

  // ordering is (horizon, trial) regardless of the worker schedule
  CHECK(a.trials[0].horizon == 1);
  CHECK(a.trials[3].horizon == 3);
  CHECK(a.trials[4].trial == 1);

  // every table starts with a header and carries the config hash
  const std::string hash = config_hash(cfg);
  const std::string steps = format_steps_table(cfg, a.trials[0]);
  CHECK(steps.rfind("config_hash,", 0) == 0);
  std::istringstream lines(steps);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) CHECK(line.rfind(hash + ",", 0) == 0);
}

TEST_CASE("aggregate statistics") {
  const ExperimentConfig cfg = small_flowfield();
  const FlowfieldResult r = run_flowfield(cfg);
  for (const auto& row : r.aggregate) {
    std::vector<double> v;
    for (const auto& t : r.trials) {
      if (t.horizon == row.horizon) v.push_back(t.rows[static_cast<std::size_t>(row.t)].mean_abs_error);
    }
    REQUIRE(v.size() == 3);
    const double mean = (v[0] + v[1] + v[2]) / 3.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    CHECK(row.error_mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(row.error_ci == doctest::Approx(1.96 * std::sqrt(ss / 2.0) / std::sqrt(3.0)).epsilon(1e-12));
  }
}

TEST_CASE("zero steps give the prior error for every horizon") {
  ExperimentConfig cfg = small_flowfield();
  cfg.planner.steps = 0;
  const FlowfieldResult r = run_flowfield(cfg);
  const Scenario s = make_scenario(cfg);
  const BeliefState prior = init_belief(s.inducing);
  const double prior_error =
      evaluate_error_grid(s.truth, prior, cfg.error_grid, cfg.variant).mean_abs_error;
  REQUIRE(r.aggregate.size() == 2);
  for (const auto& a : r.aggregate) {
    CHECK(a.t == 0);
    CHECK(a.error_mean == doctest::Approx(prior_error).epsilon(1e-14));
  }
}

TEST_CASE("planners agree before the first action") {
  const ExperimentConfig cfg = small_flowfield();
  const FlowfieldResult mn = run_flowfield(cfg);
  const FlowfieldResult mx = run_baseline_comparison(cfg);
  for (std::size_t i = 0; i < mn.trials.size(); ++i) {
    const StepRow& a = mn.trials[i].rows.front();
    const StepRow& b = mx.trials[i].rows.front();
    CHECK(a.step.state == b.step.state);
    CHECK(a.mean_abs_error == b.mean_abs_error);
    CHECK(a.step.entropy == b.step.entropy);
  }
}

TEST_CASE("written results replay byte for byte") {
  const ExperimentConfig cfg = small_flowfield();
  const auto out = scratch("replay");
  write_flowfield(run_flowfield(cfg), out, false);
  for (const char* f : {"resolved_config.json", "aggregate.csv", "inducing.csv", "timing.json"}) {
    CHECK(std::filesystem::exists(out / f));
  }
  const auto trial = out / "trials" / "h03_trial002";
  CHECK(std::filesystem::exists(trial / "field.csv"));
  std::string msg;
  CHECK(replay_trial(trial, &msg));

  std::ofstream(trial / "steps.csv", std::ios::app) << "tampered\n";
  CHECK_FALSE(replay_trial(trial, &msg));
  CHECK(msg.find("differs") != std::string::npos);

  // a second run into a fresh directory produces identical deterministic files
  const auto again = scratch("replay_again");
  write_flowfield(run_flowfield(cfg), again, false);
  CHECK(slurp(out / "aggregate.csv") == slurp(again / "aggregate.csv"));
  CHECK(slurp(out / "trials/h01_trial000/field.csv") == slurp(again / "trials/h01_trial000/field.csv"));
  std::filesystem::remove_all(out);
  std::filesystem::remove_all(again);
}

TEST_CASE("bound demo trivial cases") {
  ExperimentConfig cfg = config_from_json(json::parse(R"({
    "experiment": "bound_demo_1d",
    "kernel": {"jitter": 0.0},
    "bound_demo": {"grid_points": 20, "noise_bound": 0.0}
  })"));
  const Box d{pt(0.0), pt(1.0)};
  const GroundTruth truth =
      make_ground_truth(3, base_kernel_spec(cfg), 7, d, 0.0);

  Dataset all;
  all.locations = grid_points(d, {20});
  all.values.resize(20);
  for (int i = 0; i < 20; ++i) all.values(i) = truth.field(all.locations[i]);
  const BoundDemoResult full = evaluate_bound_demo(cfg, truth.field, all);
  REQUIRE(full.rows.size() == 20);
  for (const auto& r : full.rows) {
    CHECK(r.abs_error <= 1e-6);
    CHECK(r.bound <= 1e-6);
  }

  Dataset none;
  none.noise_bound = 0.1;
  const BoundDemoResult empty = evaluate_bound_demo(cfg, truth.field, none);
  for (const auto& r : empty.rows) {
    CHECK(r.bound == doctest::Approx(truth.field.rkhs_norm()).epsilon(1e-14));
    CHECK(r.mean == 0.0);
  }
}

TEST_CASE("default bound demo has no violations") {
  const ExperimentConfig cfg = config_from_json(json{{"experiment", "bound_demo_1d"}});
  const BoundDemoResult r = run_bound_demo_1d(cfg);
  CHECK(r.rows.size() == 200);
  CHECK(r.data.size() == 8);
  CHECK(r.violations == 0);
  int manual = 0;
  for (const auto& row : r.rows) manual += row.abs_error > row.bound;
  CHECK(manual == 0);
  CHECK_THROWS_AS(run_bound_demo_1d(small_flowfield()), std::invalid_argument);
  CHECK_THROWS_AS(run_flowfield(cfg), std::invalid_argument);
}
