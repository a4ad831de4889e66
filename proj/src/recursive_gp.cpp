#include "sgpplan/recursive_gp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sgp {

namespace {

// q(x), exactly a unit vector at an inducing point.
Eigen::VectorXd projection(const InducingSet& z, const Point& x) {
  const int idx = z.index_of(x);
  if (idx >= 0) return Eigen::VectorXd::Unit(z.size(), idx);
  return z.weights(x);
}

double fic_surcharge(const InducingSet& z, const Point& x) {
  return base_kernel(z.base_kernel(), x, x) - z.nystrom_diagonal(x);
}

}  // namespace

KernelFamily family_of(SparseVariant variant) {
  return variant == SparseVariant::SoR ? KernelFamily::SoR : KernelFamily::FIC;
}

BeliefState init_belief(std::shared_ptr<const InducingSet> inducing) {
  if (!inducing) throw std::invalid_argument("init_belief: null inducing set");
  BeliefState b;
  b.mu = Eigen::VectorXd::Zero(inducing->size());
  b.sigma = inducing->prior_covariance();
  b.step = 0;
  b.inducing = std::move(inducing);
  return b;
}

MeasurementPrediction predict_covariance(const InducingSet& inducing, const Eigen::MatrixXd& sigma,
                                         const Point& x, SparseVariant variant, double noise_std) {
  MeasurementPrediction p;
  p.location = x;
  const Eigen::VectorXd q = projection(inducing, x);
  p.s_yZ = sigma * q;
  double var = q.dot(p.s_yZ);
  if (variant == SparseVariant::FIC) var += fic_surcharge(inducing, x);
  p.s_yy = var + noise_std * noise_std + inducing.base_kernel().jitter;
  return p;
}

MeasurementPrediction predict(const BeliefState& belief, const Point& x, SparseVariant variant,
                              double noise_std) {
  MeasurementPrediction p =
      predict_covariance(*belief.inducing, belief.sigma, x, variant, noise_std);
  p.y_hat = projection(*belief.inducing, x).dot(belief.mu);
  return p;
}

Eigen::MatrixXd update_covariance(const Eigen::MatrixXd& sigma,
                                  const MeasurementPrediction& pred) {
  if (!(pred.s_yy > 0.0)) {
    throw std::domain_error("recursive_gp: non-positive innovation variance");
  }
  Eigen::MatrixXd next = sigma - (pred.s_yZ * pred.s_yZ.transpose()) / pred.s_yy;
  return 0.5 * (next + next.transpose());
}

BeliefState update(const BeliefState& belief, const MeasurementPrediction& pred, double y) {
  BeliefState next;
  next.sigma = update_covariance(belief.sigma, pred);
  next.mu = belief.mu + pred.s_yZ * ((y - pred.y_hat) / pred.s_yy);
  next.step = belief.step + 1;
  next.inducing = belief.inducing;
  return next;
}

double entropy_cost(const Eigen::MatrixXd& sigma) {
  const double log_2pie = std::log(2.0 * std::numbers::pi * std::numbers::e);
  return 0.5 * (static_cast<double>(sigma.rows()) * log_2pie + SpdFactor(sigma).log_det());
}

FieldPrediction predict_field(const BeliefState& belief, const Point& x, const Point& xp,
                              SparseVariant variant) {
  const InducingSet& z = *belief.inducing;
  const Eigen::VectorXd qx = projection(z, x);
  FieldPrediction out;
  out.mean = qx.dot(belief.mu);
  if (x == xp) {
    out.cov = qx.dot(belief.sigma * qx);
    if (variant == SparseVariant::FIC) out.cov += fic_surcharge(z, x);
  } else {
    out.cov = qx.dot(belief.sigma * projection(z, xp));
  }
  return out;
}

}  // namespace sgp
