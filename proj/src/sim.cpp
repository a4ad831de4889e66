#include "sgpplan/sim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sgp {

void DoubleGyreConfig::validate() const {
  if (!(gyre_strength > 0.0) || !(speed > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("DoubleGyreConfig: V_g, V and dt must be positive");
  if (domain.lo.size() != 2 || domain.hi.size() != 2 ||
      !(domain.hi.array() > domain.lo.array()).all())
    throw std::invalid_argument("DoubleGyreConfig: degenerate domain");
}

Eigen::VectorXd double_gyre_step(const DoubleGyreConfig& cfg, const Eigen::VectorXd& state,
                                 double heading) {
  if (state.size() != 2) throw std::invalid_argument("double_gyre_step: state must be 2D");
  constexpr double pi = std::numbers::pi;
  const double x = state(0);
  const double y = state(1);
  Eigen::VectorXd next(2);
  next(0) = x + cfg.dt * (cfg.gyre_strength * -std::sin(pi * x) * std::cos(pi * y) +
                          cfg.speed * std::cos(heading));
  next(1) = y + cfg.dt * (cfg.gyre_strength * std::cos(pi * x) * std::sin(pi * y) +
                          cfg.speed * std::sin(heading));
  return next;
}

Transition double_gyre_transition(const DoubleGyreConfig& cfg) {
  cfg.validate();
  return Transition{[cfg](const Eigen::VectorXd& s, double u) { return double_gyre_step(cfg, s, u); },
                    cfg.domain};
}

GroundTruth make_ground_truth(std::uint64_t seed, const KernelSpec& kernel, int m,
                              const Box& domain, double noise_bound) {
  if (m < 1) throw std::invalid_argument("make_ground_truth: need m >= 1");
  if (!(noise_bound >= 0.0)) throw std::invalid_argument("make_ground_truth: negative noise");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  PointList centers;
  Eigen::VectorXd weights(m);
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd c(domain.lo.size());
    for (Eigen::Index d = 0; d < c.size(); ++d) {
      c(d) = domain.lo(d) + unit(rng) * (domain.hi(d) - domain.lo(d));
    }
    centers.push_back(std::move(c));
  }
  for (int i = 0; i < m; ++i) weights(i) = normal(rng);
  return GroundTruth{RkhsFunction(std::move(centers), std::move(weights), kernel.base()), domain,
                     noise_bound};
}

double sample_measurement(const GroundTruth& truth, const Point& x, std::mt19937_64& rng) {
  const double s = truth.field(x);
  if (truth.noise_bound == 0.0) return s;
  std::uniform_real_distribution<double> noise(-truth.noise_bound, truth.noise_bound);
  double eps = noise(rng);
  while (eps == -truth.noise_bound) eps = noise(rng);  // keep |eps| < bound strictly
  return s + eps;
}

PointList grid_points(const Box& domain, const std::vector<int>& resolution) {
  const auto dim = static_cast<std::size_t>(domain.lo.size());
  if (resolution.size() != dim) throw std::invalid_argument("grid_points: resolution rank");
  std::vector<std::vector<double>> axes(dim);
  std::size_t total = 1;
  for (std::size_t d = 0; d < dim; ++d) {
    const int n = resolution[d];
    if (n < 1) throw std::invalid_argument("grid_points: resolution must be >= 1");
    const double lo = domain.lo(static_cast<Eigen::Index>(d));
    const double hi = domain.hi(static_cast<Eigen::Index>(d));
    for (int i = 0; i < n; ++i) {
      axes[d].push_back(n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1));
    }
    total *= static_cast<std::size_t>(n);
  }
  // first axis varies fastest
  PointList pts;
  pts.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(dim));
    std::size_t rem = flat;
    for (std::size_t d = 0; d < dim; ++d) {
      p(static_cast<Eigen::Index>(d)) = axes[d][rem % axes[d].size()];
      rem /= axes[d].size();
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

ErrorGrid evaluate_error_grid(const GroundTruth& truth, const BeliefState& belief,
                              const std::vector<int>& resolution, SparseVariant variant) {
  ErrorGrid g;
  g.resolution = resolution;
  g.points = grid_points(truth.domain, resolution);
  g.errors.reserve(g.points.size());
  double sum = 0.0;
  for (const auto& p : g.points) {
    const double e = std::abs(truth.field(p) - predict_field(belief, p, p, variant).mean);
    g.errors.push_back(e);
    sum += e;
  }
  g.mean_abs_error = sum / static_cast<double>(g.points.size());
  return g;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace sgp
