#pragma once

#include <memory>

#include "sgpplan/kernels.hpp"

namespace sgp {

enum class SparseVariant { SoR, FIC };

KernelFamily family_of(SparseVariant variant);

/// Gaussian belief (mu, Sigma) over the inducing values y_Z.
///
/// The prior covariance is K_Z + jitter I, the same matrix whose factor
/// defines q(x), so that every prediction is consistent with the batch
/// Gram matrices built by gp_core. Measurement variances likewise carry
/// the jitter on top of sigma_eps^2.
struct BeliefState {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  int step = 0;
  std::shared_ptr<const InducingSet> inducing;
};

struct MeasurementPrediction {
  Point location;
  double y_hat = 0.0;
  double s_yy = 0.0;
  Eigen::VectorXd s_yZ;
};

struct FieldPrediction {
  double mean = 0.0;
  double cov = 0.0;
};

BeliefState init_belief(std::shared_ptr<const InducingSet> inducing);

/// Innovation statistics of a measurement taken at x (the location of the
/// incoming measurement).
MeasurementPrediction predict(const BeliefState& belief, const Point& x, SparseVariant variant,
                              double noise_std);

/// Kalman update with a scalar measurement. Throws std::domain_error when the
/// innovation variance is not positive.
BeliefState update(const BeliefState& belief, const MeasurementPrediction& pred, double y);

/// Covariance-only update Sigma - s_yZ s_yZ^T / s_yy, re-symmetrized.
Eigen::MatrixXd update_covariance(const Eigen::MatrixXd& sigma, const MeasurementPrediction& pred);

/// Innovation statistics for a bare covariance (no mean), used for measurement-free rollouts.
MeasurementPrediction predict_covariance(const InducingSet& inducing, const Eigen::MatrixXd& sigma,
                                         const Point& x, SparseVariant variant, double noise_std);

/// c(Sigma) = 1/2 log det(2 pi e Sigma).
double entropy_cost(const Eigen::MatrixXd& sigma);

/// Posterior field mean at x and covariance between x and x'.
FieldPrediction predict_field(const BeliefState& belief, const Point& x, const Point& xp,
                              SparseVariant variant);

}  // namespace sgp
