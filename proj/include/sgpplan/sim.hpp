#pragma once

#include <cstdint>
#include <random>

#include "sgpplan/gp_core.hpp"
#include "sgpplan/planner.hpp"
#include "sgpplan/recursive_gp.hpp"

namespace sgp {

struct DoubleGyreConfig {
  double gyre_strength = 0.3;  // V_g
  double speed = 0.2;          // V
  double dt = 0.1;
  Box domain{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(2.0, 1.0)};

  void validate() const;
};

/// state + dt * (V_g [-sin(pi x) cos(pi y), cos(pi x) sin(pi y)] + V [cos u, sin u]).
Eigen::VectorXd double_gyre_step(const DoubleGyreConfig& cfg, const Eigen::VectorXd& state,
                                 double heading);

Transition double_gyre_transition(const DoubleGyreConfig& cfg);

/// Scalar field over a rectangular domain with a bounded measurement noise.
struct GroundTruth {
  RkhsFunction field;
  Box domain;
  double noise_bound = 0.0;
};

/// Seeded field: m centers uniform in the domain, weights standard normal.
GroundTruth make_ground_truth(std::uint64_t seed, const KernelSpec& kernel, int m,
                              const Box& domain, double noise_bound);

/// s(x) + eps, eps ~ Uniform(-noise_bound, noise_bound) (open interval).
double sample_measurement(const GroundTruth& truth, const Point& x, std::mt19937_64& rng);

/// Regular grid over the domain, endpoints included (cell center when a side has one point).
PointList grid_points(const Box& domain, const std::vector<int>& resolution);

struct ErrorGrid {
  std::vector<int> resolution;
  PointList points;
  std::vector<double> errors;
  double mean_abs_error = 0.0;
};

ErrorGrid evaluate_error_grid(const GroundTruth& truth, const BeliefState& belief,
                              const std::vector<int>& resolution, SparseVariant variant);

/// Deterministic 64-bit seed for one stream of a trial, derived from the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stream);

}  // namespace sgp
