#include "sgpplan/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace sgp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTruthStream = 0;
constexpr std::uint64_t kInitialStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kDemoTruthStream = 10;
constexpr std::uint64_t kDemoLocationStream = 11;
constexpr std::uint64_t kDemoNoiseStream = 12;

std::string num(double v) { return fmt::format("{:.17g}", v); }

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in '" + section + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json points_json(const PointList& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(to_std(p));
  return arr;
}

PointList points_from_json(const json& arr) {
  PointList pts;
  for (const auto& p : arr) pts.push_back(to_vec(p.get<std::vector<double>>()));
  return pts;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string trial_dir_name(int horizon, int trial) {
  return fmt::format("h{:02d}_trial{:03d}", horizon, trial);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::BoundDemo1D:
      return "bound_demo_1d";
    case ExperimentKind::FlowfieldEntropyMin:
      return "flowfield_entropy_min";
    case ExperimentKind::FlowfieldEntropyMax:
      return "flowfield_entropy_max";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "bound_demo_1d") return ExperimentKind::BoundDemo1D;
  if (s == "flowfield_entropy_min") return ExperimentKind::FlowfieldEntropyMin;
  if (s == "flowfield_entropy_max") return ExperimentKind::FlowfieldEntropyMax;
  throw std::invalid_argument("config: unknown experiment kind '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  base_kernel_spec(*this).validate();
  if (kind == ExperimentKind::BoundDemo1D) {
    const auto& b = bound_demo;
    if (!(b.domain_hi > b.domain_lo)) throw std::invalid_argument("config: empty 1D domain");
    if (b.truth_centers < 1) throw std::invalid_argument("config: truth_centers must be >= 1");
    if (b.measurements < 0) throw std::invalid_argument("config: measurements must be >= 0");
    if (b.grid_points < 1) throw std::invalid_argument("config: grid_points must be >= 1");
    if (!(b.noise_bound >= 0.0)) throw std::invalid_argument("config: noise_bound must be >= 0");
    return;
  }
  gyre.validate();
  if (planner.horizons.empty()) throw std::invalid_argument("config: no horizons");
  for (int h : planner.horizons) {
    if (h < 1) throw std::invalid_argument("config: horizons must be >= 1");
  }
  if (planner.steps < 0) throw std::invalid_argument("config: steps must be >= 0");
  if (planner.n_controls < 1) throw std::invalid_argument("config: n_controls must be >= 1");
  if (!(planner.delta >= 0.0)) throw std::invalid_argument("config: delta must be >= 0");
  if (!(planner.epsilon >= 0.0)) throw std::invalid_argument("config: epsilon must be >= 0");
  if (!(noise_bound >= 0.0)) throw std::invalid_argument("config: noise_bound must be >= 0");
  if (error_grid.size() != 2 || error_grid[0] < 1 || error_grid[1] < 1)
    throw std::invalid_argument("config: error_grid must be two positive integers");
  if (truth_centers < 1) throw std::invalid_argument("config: truth_centers must be >= 1");
  if (inducing_points.empty() &&
      (inducing_grid.size() != 2 || inducing_grid[0] < 1 || inducing_grid[1] < 1))
    throw std::invalid_argument("config: inducing grid must be two positive integers");
  for (const auto& z : inducing_points) {
    if (z.size() != 2) throw std::invalid_argument("config: inducing points must be 2D");
  }
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config", {"experiment", "seed", "trials", "output_dir", "kernel", "inducing",
                           "planner", "sim", "bound_demo"});
  ExperimentConfig c;
  if (!j.contains("experiment")) throw std::invalid_argument("config: missing 'experiment'");
  c.kind = experiment_kind_from_string(j.at("experiment").get<std::string>());
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.trials = get_or<int>(j, "trials", c.kind == ExperimentKind::BoundDemo1D ? 1 : c.trials);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);

  const json kernel = j.value("kernel", json::object());
  check_keys(kernel, "kernel", {"lengthscale", "signal_variance", "jitter", "variant"});
  c.lengthscale =
      get_or<double>(kernel, "lengthscale", c.kind == ExperimentKind::BoundDemo1D ? 0.1 : 0.3);
  c.signal_variance = get_or<double>(kernel, "signal_variance", c.signal_variance);
  c.jitter = get_or<double>(kernel, "jitter", 1e-9 * c.signal_variance);
  const std::string variant = get_or<std::string>(kernel, "variant", "fic");
  if (variant == "sor") {
    c.variant = SparseVariant::SoR;
  } else if (variant == "fic") {
    c.variant = SparseVariant::FIC;
  } else {
    throw std::invalid_argument("config: kernel.variant must be 'sor' or 'fic'");
  }

  const json inducing = j.value("inducing", json::object());
  check_keys(inducing, "inducing", {"grid", "points"});
  c.inducing_grid = get_or<std::vector<int>>(inducing, "grid", c.inducing_grid);
  if (inducing.contains("points")) c.inducing_points = points_from_json(inducing.at("points"));

  const json planner = j.value("planner", json::object());
  check_keys(planner, "planner", {"horizons", "delta", "epsilon", "n_controls", "steps"});
  c.planner.horizons = get_or<std::vector<int>>(planner, "horizons", c.planner.horizons);
  c.planner.delta = get_or<double>(planner, "delta", c.planner.delta);
  if (planner.contains("epsilon")) {
    const json& e = planner.at("epsilon");
    if (e.is_string()) {
      if (e.get<std::string>() != "inf") throw std::invalid_argument("config: epsilon string must be 'inf'");
      c.planner.epsilon = std::numeric_limits<double>::infinity();
    } else {
      c.planner.epsilon = get_or<double>(planner, "epsilon", 0.0);
    }
  }
  c.planner.n_controls = get_or<int>(planner, "n_controls", c.planner.n_controls);
  c.planner.steps = get_or<int>(planner, "steps", c.planner.steps);

  const json sim = j.value("sim", json::object());
  check_keys(sim, "sim", {"gyre_strength", "speed", "dt", "domain", "noise_bound", "error_grid",
                          "truth_centers", "snapshot_step"});
  c.gyre.gyre_strength = get_or<double>(sim, "gyre_strength", c.gyre.gyre_strength);
  c.gyre.speed = get_or<double>(sim, "speed", c.gyre.speed);
  c.gyre.dt = get_or<double>(sim, "dt", c.gyre.dt);
  if (sim.contains("domain")) {
    const json& d = sim.at("domain");
    check_keys(d, "sim.domain", {"lo", "hi"});
    c.gyre.domain.lo = to_vec(d.at("lo").get<std::vector<double>>());
    c.gyre.domain.hi = to_vec(d.at("hi").get<std::vector<double>>());
  }
  c.noise_bound = get_or<double>(sim, "noise_bound", c.noise_bound);
  c.error_grid = get_or<std::vector<int>>(sim, "error_grid", c.error_grid);
  c.truth_centers = get_or<int>(sim, "truth_centers", c.truth_centers);
  c.snapshot_step = get_or<int>(sim, "snapshot_step", c.snapshot_step);

  const json demo = j.value("bound_demo", json::object());
  check_keys(demo, "bound_demo",
             {"domain", "truth_centers", "measurements", "grid_points", "noise_bound"});
  if (demo.contains("domain")) {
    const auto d = demo.at("domain").get<std::vector<double>>();
    if (d.size() != 2) throw std::invalid_argument("config: bound_demo.domain must be [lo, hi]");
    c.bound_demo.domain_lo = d[0];
    c.bound_demo.domain_hi = d[1];
  }
  c.bound_demo.truth_centers = get_or<int>(demo, "truth_centers", c.bound_demo.truth_centers);
  c.bound_demo.measurements = get_or<int>(demo, "measurements", c.bound_demo.measurements);
  c.bound_demo.grid_points = get_or<int>(demo, "grid_points", c.bound_demo.grid_points);
  c.bound_demo.noise_bound = get_or<double>(demo, "noise_bound", c.bound_demo.noise_bound);

  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.kind);
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["output_dir"] = c.output_dir;
  j["kernel"] = {{"lengthscale", c.lengthscale},
                 {"signal_variance", c.signal_variance},
                 {"jitter", c.jitter},
                 {"variant", c.variant == SparseVariant::SoR ? "sor" : "fic"}};
  j["inducing"] = {{"grid", c.inducing_grid}};
  if (!c.inducing_points.empty()) j["inducing"]["points"] = points_json(c.inducing_points);
  j["planner"] = {{"horizons", c.planner.horizons},
                  {"delta", c.planner.delta},
                  {"n_controls", c.planner.n_controls},
                  {"steps", c.planner.steps}};
  if (std::isinf(c.planner.epsilon)) {
    j["planner"]["epsilon"] = "inf";
  } else {
    j["planner"]["epsilon"] = c.planner.epsilon;
  }
  j["sim"] = {{"gyre_strength", c.gyre.gyre_strength},
              {"speed", c.gyre.speed},
              {"dt", c.gyre.dt},
              {"domain", {{"lo", to_std(c.gyre.domain.lo)}, {"hi", to_std(c.gyre.domain.hi)}}},
              {"noise_bound", c.noise_bound},
              {"error_grid", c.error_grid},
              {"truth_centers", c.truth_centers},
              {"snapshot_step", c.snapshot_step}};
  j["bound_demo"] = {{"domain", {c.bound_demo.domain_lo, c.bound_demo.domain_hi}},
                     {"truth_centers", c.bound_demo.truth_centers},
                     {"measurements", c.bound_demo.measurements},
                     {"grid_points", c.bound_demo.grid_points},
                     {"noise_bound", c.bound_demo.noise_bound}};
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");  // where results go does not change them
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

KernelSpec base_kernel_spec(const ExperimentConfig& cfg) {
  return KernelSpec::squared_exponential(cfg.lengthscale, cfg.signal_variance, cfg.jitter);
}

PointList interior_grid(const Box& domain, const std::vector<int>& shape) {
  PointList pts;
  for (int j = 0; j < shape[1]; ++j) {
    for (int i = 0; i < shape[0]; ++i) {
      Eigen::VectorXd p(2);
      p(0) = domain.lo(0) + (domain.hi(0) - domain.lo(0)) * (i + 1) / (shape[0] + 1);
      p(1) = domain.lo(1) + (domain.hi(1) - domain.lo(1)) * (j + 1) / (shape[1] + 1);
      pts.push_back(std::move(p));
    }
  }
  return pts;
}

Scenario make_scenario(const ExperimentConfig& cfg) {
  const KernelSpec kernel = base_kernel_spec(cfg);
  Scenario s{make_ground_truth(derive_seed(cfg.seed, 0, kTruthStream), kernel, cfg.truth_centers,
                               cfg.gyre.domain, cfg.noise_bound),
             nullptr, Eigen::VectorXd()};
  PointList z = cfg.inducing_points.empty() ? interior_grid(cfg.gyre.domain, cfg.inducing_grid)
                                            : cfg.inducing_points;
  auto inducing = std::make_shared<const InducingSet>(kernel, std::move(z));
  s.inducing_centroid = Eigen::VectorXd::Zero(2);
  for (const auto& p : inducing->points()) s.inducing_centroid += p;
  s.inducing_centroid /= static_cast<double>(inducing->size());
  s.inducing = std::move(inducing);
  return s;
}

Eigen::VectorXd initial_position(const ExperimentConfig& cfg, int trial) {
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), kInitialStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box& d = cfg.gyre.domain;
  Eigen::VectorXd x(2);
  for (int i = 0; i < 2; ++i) x(i) = d.lo(i) + unit(rng) * (d.hi(i) - d.lo(i));
  return x;
}

TrialRecord run_trial(const ExperimentConfig& cfg, const Scenario& scenario, int trial,
                      int horizon, bool measurement_entropy) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.trial = trial;
  rec.horizon = horizon;
  rec.measurement_entropy = measurement_entropy;
  rec.initial_state = initial_position(cfg, trial);

  ExecutionConfig exec;
  exec.horizon = horizon;
  exec.steps = cfg.planner.steps;
  exec.pruner.delta = cfg.planner.delta;
  exec.pruner.epsilon = measurement_entropy ? std::numeric_limits<double>::infinity()
                                            : cfg.planner.epsilon;
  exec.pruner.controls = uniform_headings(cfg.planner.n_controls);
  exec.variant = cfg.variant;
  exec.noise_std = cfg.noise_bound;
  exec.cost = measurement_entropy ? measurement_entropy_cost() : posterior_entropy_cost();

  std::mt19937_64 noise_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), kNoiseStream));
  auto measure = [&](const Eigen::VectorXd& x) {
    return sample_measurement(scenario.truth, x, noise_rng);
  };
  auto observe = [&](const StepRecord& step, const BeliefState& belief) {
    StepRow row;
    row.step = step;
    row.mean_abs_error =
        evaluate_error_grid(scenario.truth, belief, cfg.error_grid, cfg.variant).mean_abs_error;
    row.centroid_distance = (step.state - scenario.inducing_centroid).norm();
    if (step.t == cfg.snapshot_step) rec.snapshot = belief;
    rec.rows.push_back(std::move(row));
  };

  ExecutionResult res = plan_and_execute(rec.initial_state, init_belief(scenario.inducing),
                                         double_gyre_transition(cfg.gyre), measure, exec, observe);
  rec.final_belief = std::move(res.final_belief);
  rec.final_plan = std::move(res.final_plan);
  rec.totals = res.totals;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records) {
  std::map<std::pair<int, int>, std::vector<const StepRow*>> groups;
  for (const auto& r : records) {
    for (const auto& row : r.rows) groups[{r.horizon, row.step.t}].push_back(&row);
  }
  auto mean_ci = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return std::pair{mean, 1.96 * sd / std::sqrt(n)};
  };
  std::vector<AggregateRow> out;
  for (const auto& [key, rows] : groups) {
    std::vector<double> err, ent, dist;
    for (const StepRow* r : rows) {
      err.push_back(r->mean_abs_error);
      ent.push_back(r->step.entropy);
      dist.push_back(r->centroid_distance);
    }
    AggregateRow a;
    a.horizon = key.first;
    a.t = key.second;
    a.trials = static_cast<int>(rows.size());
    std::tie(a.error_mean, a.error_ci) = mean_ci(err);
    std::tie(a.entropy_mean, a.entropy_ci) = mean_ci(ent);
    a.centroid_distance_mean = mean_ci(dist).first;
    out.push_back(a);
  }
  return out;
}

FlowfieldResult run_flowfield(const ExperimentConfig& cfg, bool measurement_entropy) {
  if (cfg.kind == ExperimentKind::BoundDemo1D) {
    throw std::invalid_argument("run_flowfield: config is a 1D bound demo");
  }
  FlowfieldResult result{cfg, make_scenario(cfg), {}, {}};
  std::vector<std::pair<int, int>> jobs;
  for (int h : cfg.planner.horizons) {
    for (int t = 0; t < cfg.trials; ++t) jobs.emplace_back(h, t);
  }
  result.trials.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        result.trials[i] = run_trial(cfg, result.scenario, jobs[i].second, jobs[i].first,
                                     measurement_entropy);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  result.aggregate = aggregate(result.trials);
  return result;
}

FlowfieldResult run_baseline_comparison(const ExperimentConfig& cfg) {
  return run_flowfield(cfg, true);
}

BoundDemoResult evaluate_bound_demo(const ExperimentConfig& cfg, const RkhsFunction& truth,
                                    const Dataset& data) {
  BoundDemoResult r;
  r.config = cfg;
  r.data = data;
  r.rkhs_norm = truth.rkhs_norm();
  const KernelSpec kernel = base_kernel_spec(cfg);
  const Posterior post = batch_regress(data, kernel, false);
  Box domain{Eigen::VectorXd::Constant(1, cfg.bound_demo.domain_lo),
             Eigen::VectorXd::Constant(1, cfg.bound_demo.domain_hi)};
  for (const auto& x : grid_points(domain, {cfg.bound_demo.grid_points})) {
    BoundDemoRow row;
    row.x = x(0);
    row.truth = truth(x);
    row.mean = post.mean(x);
    row.stddev = std::sqrt(std::max(0.0, post.variance(x)));
    row.bound = worst_case_bound_thm1(r.rkhs_norm, data, kernel, x);
    row.abs_error = std::abs(row.truth - row.mean);
    if (row.abs_error > row.bound) ++r.violations;
    if (row.abs_error > row.stddev) ++r.ci_breaks;
    r.rows.push_back(row);
  }
  return r;
}

BoundDemoResult run_bound_demo_1d(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::BoundDemo1D) {
    throw std::invalid_argument("run_bound_demo_1d: config is not a 1D bound demo");
  }
  const auto& b = cfg.bound_demo;
  const Box domain{Eigen::VectorXd::Constant(1, b.domain_lo), Eigen::VectorXd::Constant(1, b.domain_hi)};
  const GroundTruth truth = make_ground_truth(derive_seed(cfg.seed, 0, kDemoTruthStream),
                                              base_kernel_spec(cfg), b.truth_centers, domain,
                                              b.noise_bound);
  std::mt19937_64 loc_rng(derive_seed(cfg.seed, 0, kDemoLocationStream));
  std::mt19937_64 noise_rng(derive_seed(cfg.seed, 0, kDemoNoiseStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset data;
  data.noise_bound = b.noise_bound;
  data.values.resize(b.measurements);
  for (int i = 0; i < b.measurements; ++i) {
    data.locations.push_back(
        Eigen::VectorXd::Constant(1, b.domain_lo + unit(loc_rng) * (b.domain_hi - b.domain_lo)));
  }
  for (int i = 0; i < b.measurements; ++i) {
    data.values(i) = sample_measurement(truth, data.locations[static_cast<std::size_t>(i)], noise_rng);
  }
  return evaluate_bound_demo(cfg, truth.field, data);
}

std::string format_steps_table(const ExperimentConfig& cfg, const TrialRecord& rec) {
  const std::string hash = config_hash(cfg);
  std::string out =
      "config_hash,planner,horizon,trial,t,x,y,control,measurement,entropy,measurement_log_det,"
      "mean_abs_error,centroid_distance,leaves,expanded,pruned\n";
  const char* planner = rec.measurement_entropy ? "entropy_max" : "entropy_min";
  for (const auto& row : rec.rows) {
    const StepRecord& s = row.step;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", hash, planner,
                       rec.horizon, rec.trial, s.t, num(s.state(0)), num(s.state(1)),
                       num(s.control), num(s.measurement), num(s.entropy),
                       num(s.measurement_log_det), num(row.mean_abs_error),
                       num(row.centroid_distance), s.leaves, s.expanded, s.pruned);
  }
  return out;
}

std::string format_aggregate_table(const ExperimentConfig& cfg,
                                   const std::vector<AggregateRow>& rows,
                                   bool measurement_entropy) {
  const std::string hash = config_hash(cfg);
  std::string out =
      "config_hash,planner,horizon,t,trials,mean_abs_error,mean_abs_error_ci_lo,"
      "mean_abs_error_ci_hi,entropy,entropy_ci_lo,entropy_ci_hi,centroid_distance\n";
  const char* planner = measurement_entropy ? "entropy_max" : "entropy_min";
  for (const auto& a : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", hash, planner, a.horizon, a.t,
                       a.trials, num(a.error_mean), num(a.error_mean - a.error_ci),
                       num(a.error_mean + a.error_ci), num(a.entropy_mean),
                       num(a.entropy_mean - a.entropy_ci), num(a.entropy_mean + a.entropy_ci),
                       num(a.centroid_distance_mean));
  }
  return out;
}

std::string format_field_table(const ExperimentConfig& cfg, const Scenario& scenario,
                               const BeliefState& belief) {
  const std::string hash = config_hash(cfg);
  std::string out = "config_hash,x,y,truth,mean,variance\n";
  for (const auto& p : grid_points(cfg.gyre.domain, cfg.error_grid)) {
    const FieldPrediction f = predict_field(belief, p, p, cfg.variant);
    out += fmt::format("{},{},{},{},{},{}\n", hash, num(p(0)), num(p(1)),
                       num(scenario.truth.field(p)), num(f.mean), num(f.cov));
  }
  return out;
}

std::string format_bound_demo_table(const BoundDemoResult& r) {
  const std::string hash = config_hash(r.config);
  std::string out = "config_hash,x,truth,mean,stddev,bound,abs_error\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", hash, num(row.x), num(row.truth), num(row.mean),
                       num(row.stddev), num(row.bound), num(row.abs_error));
  }
  return out;
}

namespace {

json trial_json(const FlowfieldResult& result, const TrialRecord& rec) {
  json j;
  j["config"] = config_to_json(result.config);
  j["config_hash"] = config_hash(result.config);
  j["trial"] = rec.trial;
  j["horizon"] = rec.horizon;
  j["planner"] = rec.measurement_entropy ? "entropy_max" : "entropy_min";
  j["initial_state"] = to_std(rec.initial_state);
  j["truth"] = {{"centers", points_json(result.scenario.truth.field.centers)},
                {"weights", to_std(result.scenario.truth.field.weights)},
                {"rkhs_norm", result.scenario.truth.field.rkhs_norm()}};
  j["inducing"] = points_json(result.scenario.inducing->points());
  json traj = json::array();
  for (const auto& row : rec.rows) traj.push_back(to_std(row.step.state));
  j["trajectory"] = traj;
  j["final_plan"] = rec.final_plan;
  j["final_belief"] = {{"mu", to_std(rec.final_belief.mu)}};
  json sigma = json::array();
  for (Eigen::Index i = 0; i < rec.final_belief.sigma.rows(); ++i) {
    sigma.push_back(to_std(rec.final_belief.sigma.row(i).transpose()));
  }
  j["final_belief"]["sigma"] = sigma;
  j["tree"] = {{"expanded", rec.totals.expanded}, {"pruned", rec.totals.pruned}};
  return j;
}

std::string inducing_table(const ExperimentConfig& cfg, const Scenario& s) {
  std::string out = "config_hash,x,y\n";
  const std::string hash = config_hash(cfg);
  for (const auto& p : s.inducing->points()) {
    out += fmt::format("{},{},{}\n", hash, num(p(0)), num(p(1)));
  }
  return out;
}

}  // namespace

void write_flowfield(const FlowfieldResult& result, const fs::path& out,
                     bool measurement_entropy) {
  fs::create_directories(out);
  write_file(out / "resolved_config.json", config_to_json(result.config).dump(2) + "\n");
  write_file(out / "aggregate.csv",
             format_aggregate_table(result.config, result.aggregate, measurement_entropy));
  write_file(out / "inducing.csv", inducing_table(result.config, result.scenario));
  json timing = json::object();
  for (const auto& rec : result.trials) {
    const fs::path dir = out / "trials" / trial_dir_name(rec.horizon, rec.trial);
    write_file(dir / "steps.csv", format_steps_table(result.config, rec));
    write_file(dir / "field.csv",
               format_field_table(result.config, result.scenario, rec.final_belief));
    if (rec.snapshot) {
      write_file(dir / "field_snapshot.csv",
                 format_field_table(result.config, result.scenario, *rec.snapshot));
    }
    write_file(dir / "trial.json", trial_json(result, rec).dump(2) + "\n");
    timing[trial_dir_name(rec.horizon, rec.trial)] = rec.wall_seconds;
  }
  // wall-clock times are the only non-reproducible output
  write_file(out / "timing.json", timing.dump(2) + "\n");
}

void write_bound_demo(const BoundDemoResult& r, const fs::path& out) {
  fs::create_directories(out);
  write_file(out / "resolved_config.json", config_to_json(r.config).dump(2) + "\n");
  write_file(out / "bound_demo.csv", format_bound_demo_table(r));
  std::string meas = "config_hash,x,y\n";
  const std::string hash = config_hash(r.config);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    meas += fmt::format("{},{},{}\n", hash, num(r.data.locations[i](0)),
                        num(r.data.values(static_cast<Eigen::Index>(i))));
  }
  write_file(out / "measurements.csv", meas);
  json summary = {{"config_hash", hash},
                  {"rkhs_norm", r.rkhs_norm},
                  {"grid_points", r.rows.size()},
                  {"violations", r.violations},
                  {"ci_breaks", r.ci_breaks}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
}

bool replay_trial(const fs::path& trial_dir, std::string* message) {
  const json j = json::parse(read_file(trial_dir / "trial.json"));
  const ExperimentConfig cfg = config_from_json(j.at("config"));
  if (config_hash(cfg) != j.at("config_hash").get<std::string>()) {
    if (message) *message = "config hash mismatch";
    return false;
  }
  const Scenario scenario = make_scenario(cfg);
  const PointList centers = points_from_json(j.at("truth").at("centers"));
  const auto weights = j.at("truth").at("weights").get<std::vector<double>>();
  if (centers != scenario.truth.field.centers || weights != to_std(scenario.truth.field.weights) ||
      points_from_json(j.at("inducing")) != scenario.inducing->points()) {
    if (message) *message = "regenerated scenario differs from the recorded one";
    return false;
  }
  const bool entropy_max = j.at("planner").get<std::string>() == "entropy_max";
  const TrialRecord rec = run_trial(cfg, scenario, j.at("trial").get<int>(),
                                    j.at("horizon").get<int>(), entropy_max);
  const std::string expected = read_file(trial_dir / "steps.csv");
  const std::string actual = format_steps_table(cfg, rec);
  if (expected != actual) {
    if (message) *message = "steps table differs from the recorded one";
    return false;
  }
  if (message) *message = fmt::format("{} rows reproduced", rec.rows.size());
  return true;
}

}  // namespace sgp
