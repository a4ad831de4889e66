#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sgp {

using Point = Eigen::VectorXd;
using PointList = std::vector<Eigen::VectorXd>;

/// Raised when a Gram (or covariance) matrix cannot be Cholesky-factorized.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factor of a symmetric positive definite matrix.
class SpdFactor {
 public:
  SpdFactor() = default;
  /// Factorizes `matrix + diag_add * I`. Throws FactorizationError on failure.
  explicit SpdFactor(const Eigen::MatrixXd& matrix, double diag_add = 0.0);

  Eigen::Index size() const { return llt_.rows(); }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }
  /// L^{-1} rhs for the lower factor L.
  Eigen::VectorXd whiten(const Eigen::VectorXd& rhs) const;
  double log_det() const;
  Eigen::MatrixXd lower() const { return llt_.matrixL(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

enum class KernelFamily { SquaredExponential, SoR, FIC };

std::string to_string(KernelFamily family);

class InducingSet;

/// A positive-definite covariance function. The sparse families (SoR, FIC)
/// approximate the squared-exponential base kernel through an inducing set;
/// their base hyperparameters are those of the inducing set.
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double jitter = 0.0;
  std::shared_ptr<const InducingSet> inducing;

  /// Default jitter is 1e-9 * signal_variance.
  static KernelSpec squared_exponential(double lengthscale, double signal_variance);
  static KernelSpec squared_exponential(double lengthscale, double signal_variance,
                                        double jitter);
  static KernelSpec sparse(KernelFamily family, std::shared_ptr<const InducingSet> inducing);

  /// The exact kernel the family approximates (identity for the exact family).
  KernelSpec base() const;
  bool is_sparse() const { return family != KernelFamily::SquaredExponential; }
  int dimension() const;  // -1 when unconstrained (exact kernel)
  void validate() const;
};

/// Inducing points Z with the cached factor of K_Z + jitter * I.
class InducingSet {
 public:
  InducingSet(const KernelSpec& base, PointList points);

  const KernelSpec& base_kernel() const { return base_; }
  const PointList& points() const { return points_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(points_.size()); }
  int dimension() const { return static_cast<int>(points_.front().size()); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  /// K_Z + jitter * I, the prior covariance of the inducing values.
  Eigen::MatrixXd prior_covariance() const;
  const SpdFactor& factor() const { return factor_; }

  /// k_Z(x).
  Eigen::VectorXd cross(const Point& x) const;
  /// q(x) = (K_Z + jitter I)^{-1} k_Z(x).
  Eigen::VectorXd weights(const Point& x) const;
  /// Nystrom diagonal k_Z(x)^T (K_Z + jitter I)^{-1} k_Z(x), exact at inducing points.
  double nystrom_diagonal(const Point& x) const;
  /// Index of the inducing point equal to x, or -1.
  int index_of(const Point& x) const;

 private:
  KernelSpec base_;
  PointList points_;
  Eigen::MatrixXd gram_;
  SpdFactor factor_;
};

/// Squared-exponential kernel value with the hyperparameters of `spec`.
double base_kernel(const KernelSpec& spec, const Point& x, const Point& xp);

/// k(x, x') for any family. SoR evaluates the Nystrom form, FIC additionally
/// restores the exact value when x == x'. Pairs involving an inducing point
/// evaluate the base kernel (the Nystrom form interpolates there).
double eval_kernel(const KernelSpec& spec, const Point& x, const Point& xp);

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const PointList& points);
Eigen::VectorXd cross_vector(const KernelSpec& spec, const PointList& points, const Point& x);

/// Factor of gram_matrix(points) + (jitter + extra_diag) * I.
SpdFactor factorize_gram(const KernelSpec& spec, const PointList& points,
                         double extra_diag = 0.0);

bool has_duplicates(const PointList& points);

}  // namespace sgp
