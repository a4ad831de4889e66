// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <fmt/core.h>

#include "sgpplan/experiment.hpp"
#include "test_util.hpp"

using namespace sgp;
using testutil::pt;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  fmt::print("{} {:>2} {}: {}\n", ok ? "PASS" : "FAIL", id, name, detail);
  std::fflush(stdout);
  failures += !ok;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Points whose exact Gram (jitter free) stays below max_cond, on a domain that
// grows with n so that rejection sampling terminates quickly.
PointList spread_points(std::mt19937_64& rng, int n, int dim, double ell, double max_cond) {
  const double side = dim == 1 ? 0.3 * n + 0.5 : 0.45 * std::sqrt(double(n)) + 0.5;
  for (;;) {
    PointList p = testutil::random_points(rng, n, dim, 0.0, side);
    if (testutil::cond(testutil::se_gram(ell, 1.0, p, p)) <= max_cond) return p;
  }
}

void criteria_1_2() {
  const auto t0 = Clock::now();
  int violations = 0;
  int contrast_instances = 0;
  std::size_t points = 0;
  for (int i = 1; i <= 200; ++i) {
    ExperimentConfig cfg = config_from_json(nlohmann::json{{"experiment", "bound_demo_1d"}});
    cfg.seed = static_cast<std::uint64_t>(i);
    cfg.bound_demo.measurements = 5 + (i - 1) % 16;
    cfg.bound_demo.grid_points = 200;
    const BoundDemoResult r = run_bound_demo_1d(cfg);
    bool contrast = false;
    for (const auto& row : r.rows) {
      // recompute the comparison instead of trusting the result's counters
      violations += row.abs_error > row.bound;
      contrast |= row.abs_error > row.stddev && row.abs_error <= row.bound;
    }
    points += r.rows.size();
    contrast_instances += contrast;
  }
  const double secs = seconds_since(t0);
  report(1, "theorem 1 bound validity", violations == 0 && secs < 30.0 && points == 200 * 200,
         fmt::format("{} violations over {} grid points, {:.2f} s", violations, points, secs));
  report(2, "confidence interval contrast", contrast_instances >= 1,
         fmt::format("{} of 200 instances break 1 sigma within the bound", contrast_instances));
}

void criterion_3() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> n_dist(1, 15);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int dim = 1 + inst % 2;
    const double ell = 0.3;
    const KernelSpec k = KernelSpec::squared_exponential(ell, 1.0, 0.0);
    const int n = n_dist(rng);
    // X together with x must be well conditioned
    const PointList all = spread_points(rng, n + 1, dim, ell, 1e6);
    const PointList x(all.begin(), all.begin() + n);
    const Point q = all.back();
    const double det_x = testutil::se_gram(ell, 1.0, x, x).fullPivLu().determinant();
    const double det_xq = testutil::se_gram(ell, 1.0, all, all).fullPivLu().determinant();
    const double oracle = std::sqrt(det_xq / det_x);
    worst = std::max(worst, std::abs(power_function(x, k, q) - oracle) / oracle);
  }
  report(3, "power function determinant identity", worst <= 1e-8,
         fmt::format("worst relative error {:.3g} over 100 instances", worst));
}

void criterion_4() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> m_dist(2, 6);
  std::uniform_int_distribution<int> n_dist(1, 10);
  const double noise = 0.05;
  double worst_lower = 0.0;
  int upper_violations = 0;
  double worst_upper = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int dim = 1 + inst % 2;
    const KernelSpec base = KernelSpec::squared_exponential(0.3, 1.0);
    const auto z = testutil::make_inducing(
        base, testutil::well_conditioned_points(rng, m_dist(rng), dim, 0.3, 1e4));
    const KernelSpec sor = KernelSpec::sparse(KernelFamily::SoR, z);
    const PointList x = testutil::random_points(rng, n_dist(rng), dim);
    const Point q = testutil::random_points(rng, 1, dim)[0];
    const double pz = power_function(z->points(), sor, q);
    const double px = power_function(x, sor, q);
    const double h = posterior_entropy_inducing(x, *z, sor, noise * noise);
    worst_lower = std::max(worst_lower, pz - px);
    const double excess = px - pz * std::exp(h);
    if (excess > 1e-8) ++upper_violations;
    worst_upper = std::max(worst_upper, excess);
  }
  report(4, "theorem 2 sandwich", worst_lower <= 1e-8 && upper_violations == 0,
         fmt::format("lower side worst slack {:.3g}; upper side {} of 100 violated (worst excess {:.3g})",
                     worst_lower, upper_violations, worst_upper));
}

struct BatchOracle {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

// Dense conditioning of y_Z on y_X under the sparse kernel, built from the
// independent squared-exponential implementation.
BatchOracle batch_oracle(SparseVariant v, double ell, double jitter, const PointList& z,
                         const PointList& x, const Eigen::VectorXd& y, double noise_var) {
  Eigen::MatrixXd kz = testutil::se_gram(ell, 1.0, z, z);
  kz.diagonal().array() += jitter;
  const Eigen::MatrixXd kzinv = kz.inverse();
  const Eigen::MatrixXd kxz = testutil::se_gram(ell, 1.0, x, z);
  Eigen::MatrixXd kxx = kxz * kzinv * kxz.transpose();
  if (v == SparseVariant::FIC) kxx.diagonal().setOnes();
  kxx.diagonal().array() += jitter + noise_var;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(kxx);
  return {kxz.transpose() * lu.solve(y), kz - kxz.transpose() * lu.solve(kxz)};
}

void criterion_5() {
  const double ell = 0.35, noise = 0.1;
  double worst = 0.0;
  for (const SparseVariant v : {SparseVariant::SoR, SparseVariant::FIC}) {
    for (int seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(500 + seed);
      const KernelSpec base = KernelSpec::squared_exponential(ell, 1.0);
      const PointList zp = testutil::well_conditioned_points(rng, 5, 2, ell, 1e4);
      const auto z = testutil::make_inducing(base, zp);
      const KernelSpec k = KernelSpec::sparse(family_of(v), z);
      const PointList x = testutil::random_points(rng, 20, 2);
      const Eigen::VectorXd y = testutil::random_vector(rng, 20);

      BeliefState b = init_belief(z);
      for (int t = 0; t < 20; ++t) b = update(b, predict(b, x[t], v, noise), y(t));

      const BatchOracle o = batch_oracle(v, ell, base.jitter, zp, x, y, noise * noise);
      worst = std::max(worst, (b.mu - o.mu).cwiseAbs().maxCoeff());
      worst = std::max(worst, (b.sigma - o.sigma).cwiseAbs().maxCoeff());
      const double h_oracle =
          0.5 * (5.0 * std::log(2.0 * std::numbers::pi * std::numbers::e) +
                 std::log(o.sigma.determinant()));
      worst = std::max(worst, std::abs(entropy_cost(b.sigma) - h_oracle));

      const Posterior post(Dataset{x, y, noise}, k, true);
      for (const auto& q : testutil::random_points(rng, 10, 2)) {
        const FieldPrediction f = predict_field(b, q, q, v);
        worst = std::max(worst, std::abs(f.mean - post.mean(q)));
        worst = std::max(worst, std::abs(f.cov - post.variance(q)));
      }
    }
  }
  report(5, "recursive and batch regression agree", worst <= 1e-6,
         fmt::format("worst absolute difference {:.3g} over 50 seeds x 2 variants", worst));
}

void criterion_6() {
  std::mt19937_64 rng(606);
  double worst = 0.0;
  const double step = 0.125;
  const Transition lattice{[step](const Eigen::VectorXd& s, double u) {
                             const double a = u * std::numbers::pi / 2.0;
                             Eigen::VectorXd n = s;
                             if (u < 4.0) {
                               n(0) += step * std::round(std::cos(a));
                               n(1) += step * std::round(std::sin(a));
                             }
                             return n;
                           },
                           std::nullopt};
  for (int inst = 0; inst < 25; ++inst) {
    const KernelSpec base = KernelSpec::squared_exponential(0.3, 1.0);
    const auto z = testutil::make_inducing(base, testutil::well_conditioned_points(rng, 3, 2, 0.3, 1e4));
    const CovariancePropagator prop{z, inst % 2 ? SparseVariant::SoR : SparseVariant::FIC, 0.1};
    const int n_controls = 2 + inst % 4;  // 2..5, control 4 stays put
    const int depth = 1 + inst % 3;
    std::vector<double> controls(n_controls);
    std::iota(controls.begin(), controls.end(), 0.0);
    const Eigen::VectorXd x0 = pt(0.5, 0.5);
    const Eigen::MatrixXd s0 = init_belief(z).sigma;
    const CostFn cost = posterior_entropy_cost();

    SearchTree tree(x0, s0, 0.0, cost);
    const PrunerConfig pruner{0.0, 0.0, controls};
    for (int d = 0; d < depth; ++d) tree.rvi_iterate(lattice, prop, cost, pruner);

    // exhaustive enumeration of every control sequence
    double best = INFINITY;
    std::function<void(const Eigen::VectorXd&, const Eigen::MatrixXd&, int)> rec =
        [&](const Eigen::VectorXd& s, const Eigen::MatrixXd& sig, int left) {
          if (left == 0) {
            best = std::min(best, entropy_cost(sig));
            return;
          }
          for (double u : controls) {
            const Eigen::VectorXd n = lattice.step(s, u);
            rec(n, prop(sig, n).first, left - 1);
          }
        };
    rec(x0, s0, depth);
    worst = std::max(worst, std::abs(tree.best_leaf().cost - best));
  }
  report(6, "RVI optimality at eps = delta = 0", worst <= 1e-10,
         fmt::format("worst |min leaf - enumeration| {:.3g} over 25 instances", worst));
}

void criteria_7_8_9() {
  const ExperimentConfig cfg = config_from_json(nlohmann::json{{"experiment", "flowfield_entropy_min"}});
  const auto t0 = Clock::now();
  const FlowfieldResult mn = run_flowfield(cfg);
  const double t_min = seconds_since(t0);
  const auto t1 = Clock::now();
  const FlowfieldResult mx = run_baseline_comparison(cfg);
  const double t_max = seconds_since(t1);

  int bad_trials = 0;
  double worst_rise = 0.0;
  for (const FlowfieldResult* r : {&mn, &mx}) {
    for (const auto& tr : r->trials) {
      bool ok = true;
      for (std::size_t i = 1; i < tr.rows.size(); ++i) {
        const double rise = tr.rows[i].step.entropy - tr.rows[i - 1].step.entropy;
        worst_rise = std::max(worst_rise, rise);
        ok &= rise <= 1e-9;
      }
      bad_trials += !ok;
    }
  }
  report(7, "entropy monotonicity", bad_trials == 0,
         fmt::format("{} of {} trials increase; largest step change {:.3g}", bad_trials,
                     mn.trials.size() + mx.trials.size(), worst_rise));

  // trial means recomputed from the raw rows
  const int steps = cfg.planner.steps;
  auto trial_mean = [](const FlowfieldResult& r, int h, int t, bool entropy) {
    double s = 0.0;
    int n = 0;
    for (const auto& tr : r.trials) {
      if (tr.horizon != h) continue;
      const StepRow& row = tr.rows.at(static_cast<std::size_t>(t));
      s += entropy ? row.step.entropy : row.mean_abs_error;
      ++n;
    }
    return s / n;
  };

  bool ok8 = true;
  std::string d8;
  for (int h : cfg.planner.horizons) {
    const double e0 = trial_mean(mn, h, 0, false), e1 = trial_mean(mn, h, steps, false);
    ok8 &= e1 < e0;
    d8 += fmt::format("N={} {:.4f}->{:.4f}; ", h, e0, e1);
  }
  const double e_h1 = trial_mean(mn, 1, steps, false);
  const double e_h10 = trial_mean(mn, 10, steps, false);
  ok8 &= e_h10 <= e_h1;
  report(8, "flow-field error decay", ok8,
         fmt::format("{}N=10 vs N=1 at step {}: {:.4f} <= {:.4f}; {} trials, {:.1f} s", d8, steps,
                     e_h10, e_h1, cfg.trials, t_min));

  bool ok9 = true;
  std::string d9;
  std::string info;
  for (int h : cfg.planner.horizons) {
    const double err_mn = trial_mean(mn, h, steps, false), err_mx = trial_mean(mx, h, steps, false);
    const double ent_mn = trial_mean(mn, h, steps, true), ent_mx = trial_mean(mx, h, steps, true);
    ok9 &= err_mx >= err_mn && ent_mx > ent_mn;
    d9 += fmt::format("N={} error {:.4f}>={:.4f} entropy {:.3f}>{:.3f}; ", h, err_mx, err_mn, ent_mx,
                      ent_mn);
    info += fmt::format(" N={} {:.4f}->{:.4f}", h, trial_mean(mx, h, 0, false), err_mx);
  }
  report(9, "baseline contrast", ok9, fmt::format("{}{:.1f} s", d9, t_max));
  fmt::print("INFO  9 baseline error step 0 -> {} (not gated):{}\n", steps, info);
}

void criterion_10() {
  const ExperimentConfig cfg = config_from_json(nlohmann::json{{"experiment", "flowfield_entropy_min"}});
  const Scenario s = make_scenario(cfg);
  const int n = 500;
  std::mt19937_64 rng(1010);

  // beliefs along a 500-step random walk of measurements
  std::vector<BeliefState> beliefs;
  std::vector<Point> locs;
  std::vector<double> ys;
  BeliefState b = init_belief(s.inducing);
  for (int t = 0; t < n; ++t) {
    const Point x = testutil::random_points(rng, 1, 2)[0].cwiseProduct(pt(2.0, 1.0));
    const double y = sample_measurement(s.truth, x, rng);
    beliefs.push_back(b);
    locs.push_back(x);
    ys.push_back(y);
    b = update(b, predict(b, x, cfg.variant, cfg.noise_bound), y);
  }

  // min over repeats of the time of an inner batch, in shuffled step order
  const int inner = 40, repeats = 25;
  std::vector<double> best(n, INFINITY);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  double sink = 0.0;
  for (int r = 0; r < repeats; ++r) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int t : order) {
      // work on a copy so that storage location does not vary with t
      const BeliefState work = beliefs[t];
      const Point x = locs[t];
      const auto t0 = Clock::now();
      for (int i = 0; i < inner; ++i) {
        const BeliefState nb = update(work, predict(work, x, cfg.variant, cfg.noise_bound), ys[t]);
        sink += nb.mu(0);
      }
      best[t] = std::min(best[t], seconds_since(t0) / inner);
    }
  }

  // ordinary least squares slope of time against step and its t statistic
  const double tbar = (n - 1) / 2.0;
  const double ybar = std::accumulate(best.begin(), best.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (int t = 0; t < n; ++t) {
    sxx += (t - tbar) * (t - tbar);
    sxy += (t - tbar) * (best[t] - ybar);
  }
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (int t = 0; t < n; ++t) {
    const double r = best[t] - ybar - slope * (t - tbar);
    rss += r * r;
  }
  const double tstat = slope / std::sqrt(rss / (n - 2) / sxx);
  report(10, "filter cost independent of step", std::abs(tstat) < 2.576 && std::isfinite(sink),
         fmt::format("mean {:.3g} us/step, slope {:.3g} us/step^2, t = {:.2f} (|t| < 2.576)",
                     ybar * 1e6, slope * 1e6, tstat));
}

}  // namespace

int main() {
  try {
    criteria_1_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criteria_7_8_9();
    criterion_10();
  } catch (const std::exception& e) {
    fmt::print("FAIL acceptance aborted: {}\n", e.what());
    return 2;
  }
  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
