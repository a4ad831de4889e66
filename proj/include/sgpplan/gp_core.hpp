#pragma once

#include <optional>

#include "sgpplan/kernels.hpp"

namespace sgp {

/// s(x) = sum_i alpha_i k(x, x_i) under an exact kernel, a member of the RKHS of k.
struct RkhsFunction {
  PointList centers;
  Eigen::VectorXd weights;
  KernelSpec kernel;

  RkhsFunction(PointList centers, Eigen::VectorXd weights, KernelSpec kernel);

  double operator()(const Point& x) const;
  /// sqrt(alpha^T K alpha).
  double rkhs_norm() const;
};

struct Dataset {
  PointList locations;
  Eigen::VectorXd values;
  double noise_bound = 0.0;

  std::size_t size() const { return locations.size(); }
  void validate() const;
};

/// Posterior GP given a dataset: mean k_X(x)^T K^{-1} y and covariance
/// k(x,x') - k_X(x)^T K^{-1} k_X(x'), where K = K_X + jitter I, optionally
/// plus noise_bound^2 I. An empty dataset yields the prior.
class Posterior {
 public:
  Posterior(Dataset data, KernelSpec kernel, bool noise_on_diag);

  double mean(const Point& x) const;
  double covariance(const Point& x, const Point& xp) const;
  double variance(const Point& x) const { return covariance(x, x); }

  const Dataset& data() const { return data_; }
  const KernelSpec& kernel() const { return kernel_; }

 private:
  Dataset data_;
  KernelSpec kernel_;
  std::optional<SpdFactor> factor_;
  Eigen::VectorXd alpha_;
};

Posterior batch_regress(const Dataset& data, const KernelSpec& kernel, bool noise_on_diag);

/// Noise-free posterior standard deviation at x given measurement locations.
double power_function(const PointList& locations, const KernelSpec& kernel, const Point& x);

/// ||K_X^{-1} k_X(x)||; zero for an empty location set.
double lambda_factor(const PointList& locations, const KernelSpec& kernel, const Point& x);

/// ||s|| P_X(x) + sqrt(sigma_eps^2 N Lambda(x)^2).
double worst_case_bound_thm1(double s_norm, const Dataset& data, const KernelSpec& kernel,
                             const Point& x);

/// H(y_Z | y_X) = 1/2 log((2 pi e)^M det K_{Z u X} / det K_X), evaluated with
/// log-determinants. `noise_variance` is added to the diagonal entries of the
/// measurement block, jitter to all diagonal entries.
double posterior_entropy_inducing(const PointList& locations, const InducingSet& inducing,
                                  const KernelSpec& kernel, double noise_variance = 0.0);

/// ||s|| P_Z(x) exp H(y_Z | y_X) + sqrt(sigma_eps^2 N Lambda(x)^2) for a sparse
/// (conditionally independent) kernel. The entropy uses the dataset's noise
/// bound as measurement variance, like the recursive filter.
double worst_case_bound_thm2(double s_norm, const Dataset& data, const KernelSpec& kernel,
                             const Point& x);

}  // namespace sgp
