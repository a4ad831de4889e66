#include "sgpplan/gp_core.hpp"

#include <cmath>
#include <numbers>

namespace sgp {

namespace {

void reject_noise_free_duplicates(const PointList& locations, const KernelSpec& kernel,
                                  double extra_diag) {
  if (extra_diag > 0.0 || kernel.family == KernelFamily::FIC) return;
  if (has_duplicates(locations)) {
    throw FactorizationError("duplicate measurement locations without measurement noise");
  }
}

double clamped_sqrt(double variance) { return std::sqrt(std::max(0.0, variance)); }

}  // namespace

RkhsFunction::RkhsFunction(PointList c, Eigen::VectorXd w, KernelSpec k)
    : centers(std::move(c)), weights(std::move(w)), kernel(std::move(k)) {
  if (kernel.is_sparse()) throw std::invalid_argument("RkhsFunction: kernel must be exact");
  if (centers.empty()) throw std::invalid_argument("RkhsFunction: need at least one center");
  if (static_cast<Eigen::Index>(centers.size()) != weights.size())
    throw std::invalid_argument("RkhsFunction: centers/weights size mismatch");
}

double RkhsFunction::operator()(const Point& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    s += weights(static_cast<Eigen::Index>(i)) * eval_kernel(kernel, x, centers[i]);
  }
  return s;
}

double RkhsFunction::rkhs_norm() const {
  const double sq = weights.dot(gram_matrix(kernel, centers) * weights);
  return std::sqrt(std::max(0.0, sq));
}

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(locations.size()) != values.size())
    throw std::invalid_argument("Dataset: locations/values size mismatch");
  if (!values.allFinite()) throw std::invalid_argument("Dataset: non-finite values");
  if (!(noise_bound >= 0.0)) throw std::invalid_argument("Dataset: negative noise bound");
}

Posterior::Posterior(Dataset data, KernelSpec kernel, bool noise_on_diag)
    : data_(std::move(data)), kernel_(std::move(kernel)) {
  data_.validate();
  kernel_.validate();
  if (data_.size() == 0) return;
  const double extra = noise_on_diag ? data_.noise_bound * data_.noise_bound : 0.0;
  reject_noise_free_duplicates(data_.locations, kernel_, extra);
  factor_ = factorize_gram(kernel_, data_.locations, extra);
  alpha_ = factor_->solve(data_.values);
}

double Posterior::mean(const Point& x) const {
  if (!factor_) return 0.0;
  return cross_vector(kernel_, data_.locations, x).dot(alpha_);
}

double Posterior::covariance(const Point& x, const Point& xp) const {
  const double prior = eval_kernel(kernel_, x, xp);
  if (!factor_) return prior;
  const Eigen::VectorXd kx = factor_->whiten(cross_vector(kernel_, data_.locations, x));
  if (x == xp) return prior - kx.squaredNorm();
  const Eigen::VectorXd kxp = factor_->whiten(cross_vector(kernel_, data_.locations, xp));
  return prior - kx.dot(kxp);
}

Posterior batch_regress(const Dataset& data, const KernelSpec& kernel, bool noise_on_diag) {
  return Posterior(data, kernel, noise_on_diag);
}

double power_function(const PointList& locations, const KernelSpec& kernel, const Point& x) {
  const double prior = eval_kernel(kernel, x, x);
  if (locations.empty()) return clamped_sqrt(prior);
  reject_noise_free_duplicates(locations, kernel, 0.0);
  const SpdFactor factor = factorize_gram(kernel, locations);
  const double variance = prior - factor.whiten(cross_vector(kernel, locations, x)).squaredNorm();
  // Tiny negatives near interpolation points are roundoff.
  return clamped_sqrt(variance);
}

double lambda_factor(const PointList& locations, const KernelSpec& kernel, const Point& x) {
  if (locations.empty()) return 0.0;
  reject_noise_free_duplicates(locations, kernel, 0.0);
  const SpdFactor factor = factorize_gram(kernel, locations);
  return factor.solve(cross_vector(kernel, locations, x)).norm();
}

double worst_case_bound_thm1(double s_norm, const Dataset& data, const KernelSpec& kernel,
                             const Point& x) {
  if (!(s_norm >= 0.0)) throw std::invalid_argument("worst_case_bound_thm1: negative norm");
  data.validate();
  const double n = static_cast<double>(data.size());
  const double lambda = lambda_factor(data.locations, kernel, x);
  const double noise_term =
      std::sqrt(data.noise_bound * data.noise_bound * n * lambda * lambda);
  return s_norm * power_function(data.locations, kernel, x) + noise_term;
}

double posterior_entropy_inducing(const PointList& locations, const InducingSet& inducing,
                                  const KernelSpec& kernel, double noise_variance) {
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("negative noise variance");
  const auto m = inducing.size();
  const auto n = static_cast<Eigen::Index>(locations.size());
  PointList joint = inducing.points();
  joint.insert(joint.end(), locations.begin(), locations.end());

  Eigen::MatrixXd g = gram_matrix(kernel, joint);
  g.diagonal().array() += kernel.jitter;
  g.diagonal().tail(n).array() += noise_variance;
  const double log_det_joint = SpdFactor(g).log_det();
  const double log_det_meas = n > 0 ? SpdFactor(g.bottomRightCorner(n, n)).log_det() : 0.0;
  const double log_2pie = std::log(2.0 * std::numbers::pi * std::numbers::e);
  return 0.5 * (static_cast<double>(m) * log_2pie + log_det_joint - log_det_meas);
}

double worst_case_bound_thm2(double s_norm, const Dataset& data, const KernelSpec& kernel,
                             const Point& x) {
  if (!kernel.is_sparse()) {
    throw std::invalid_argument("worst_case_bound_thm2: requires a conditionally independent "
                                "(SoR or FIC) kernel");
  }
  if (!(s_norm >= 0.0)) throw std::invalid_argument("worst_case_bound_thm2: negative norm");
  data.validate();
  const InducingSet& z = *kernel.inducing;
  const double p_z = power_function(z.points(), kernel, x);
  const double entropy = posterior_entropy_inducing(data.locations, z, kernel,
                                                    data.noise_bound * data.noise_bound);
  const double n = static_cast<double>(data.size());
  const double lambda = lambda_factor(data.locations, kernel, x);
  const double noise_term =
      std::sqrt(data.noise_bound * data.noise_bound * n * lambda * lambda);
  return s_norm * p_z * std::exp(entropy) + noise_term;
}

}  // namespace sgp
