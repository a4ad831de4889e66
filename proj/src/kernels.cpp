#include "sgpplan/kernels.hpp"

#include <cmath>

namespace sgp {

namespace {

void check_point(const Point& x, int dim) {
  if (dim >= 0 && x.size() != dim) {
    throw std::invalid_argument("kernel: point dimension " + std::to_string(x.size()) +
                                " does not match " + std::to_string(dim));
  }
  if (!x.allFinite()) throw std::invalid_argument("kernel: non-finite coordinates");
}

}  // namespace

SpdFactor::SpdFactor(const Eigen::MatrixXd& matrix, double diag_add) {
  if (matrix.rows() != matrix.cols()) throw FactorizationError("SpdFactor: matrix not square");
  Eigen::MatrixXd a = matrix;
  if (diag_add != 0.0) a.diagonal().array() += diag_add;
  llt_.compute(a);
  if (llt_.info() != Eigen::Success) {
    throw FactorizationError("SpdFactor: matrix is not positive definite (size " +
                             std::to_string(a.rows()) + ")");
  }
  // LLT accepts any strictly positive pivot; reject pivots lost to roundoff.
  const Eigen::VectorXd pivots = Eigen::MatrixXd(llt_.matrixL()).diagonal();
  const double scale = std::max(a.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < pivots.size(); ++i) {
    if (!(pivots(i) * pivots(i) > 1e-15 * scale)) {
      throw FactorizationError("SpdFactor: numerically singular matrix (pivot " +
                               std::to_string(i) + ")");
    }
  }
}

Eigen::VectorXd SpdFactor::whiten(const Eigen::VectorXd& rhs) const {
  return llt_.matrixL().solve(rhs);
}

double SpdFactor::log_det() const {
  const auto l = llt_.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i));
  return 2.0 * sum;
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "squared_exponential";
    case KernelFamily::SoR:
      return "sor";
    case KernelFamily::FIC:
      return "fic";
  }
  return "unknown";
}

KernelSpec KernelSpec::squared_exponential(double lengthscale, double signal_variance) {
  return squared_exponential(lengthscale, signal_variance, 1e-9 * signal_variance);
}

KernelSpec KernelSpec::squared_exponential(double lengthscale, double signal_variance,
                                           double jitter) {
  KernelSpec spec;
  spec.family = KernelFamily::SquaredExponential;
  spec.lengthscale = lengthscale;
  spec.signal_variance = signal_variance;
  spec.jitter = jitter;
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::sparse(KernelFamily family, std::shared_ptr<const InducingSet> inducing) {
  if (!inducing) throw std::invalid_argument("KernelSpec::sparse: null inducing set");
  if (family == KernelFamily::SquaredExponential) {
    throw std::invalid_argument("KernelSpec::sparse: family must be SoR or FIC");
  }
  KernelSpec spec = inducing->base_kernel();
  spec.family = family;
  spec.inducing = std::move(inducing);
  return spec;
}

KernelSpec KernelSpec::base() const {
  KernelSpec b = *this;
  b.family = KernelFamily::SquaredExponential;
  b.inducing.reset();
  return b;
}

int KernelSpec::dimension() const { return inducing ? inducing->dimension() : -1; }

void KernelSpec::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw std::invalid_argument("KernelSpec: lengthscale must be positive");
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw std::invalid_argument("KernelSpec: signal_variance must be positive");
  if (!(jitter >= 0.0) || !std::isfinite(jitter))
    throw std::invalid_argument("KernelSpec: jitter must be non-negative");
  if (is_sparse() && !inducing) throw std::invalid_argument("KernelSpec: sparse family without Z");
}

InducingSet::InducingSet(const KernelSpec& base, PointList points)
    : base_(base.base()), points_(std::move(points)) {
  base_.validate();
  if (points_.empty()) throw std::invalid_argument("InducingSet: need at least one point");
  const int dim = static_cast<int>(points_.front().size());
  for (const auto& z : points_) check_point(z, dim);
  if (has_duplicates(points_)) throw std::invalid_argument("InducingSet: duplicate points");
  gram_ = gram_matrix(base_, points_);
  factor_ = SpdFactor(gram_, base_.jitter);
}

Eigen::MatrixXd InducingSet::prior_covariance() const {
  Eigen::MatrixXd a = gram_;
  a.diagonal().array() += base_.jitter;
  return a;
}

Eigen::VectorXd InducingSet::cross(const Point& x) const {
  check_point(x, dimension());
  Eigen::VectorXd k(size());
  for (Eigen::Index i = 0; i < size(); ++i) k(i) = sgp::base_kernel(base_, x, points_[i]);
  return k;
}

Eigen::VectorXd InducingSet::weights(const Point& x) const { return factor_.solve(cross(x)); }

double InducingSet::nystrom_diagonal(const Point& x) const {
  if (index_of(x) >= 0) return base_.signal_variance;
  return factor_.whiten(cross(x)).squaredNorm();
}

int InducingSet::index_of(const Point& x) const {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].size() == x.size() && points_[i] == x) return static_cast<int>(i);
  }
  return -1;
}

double base_kernel(const KernelSpec& spec, const Point& x, const Point& xp) {
  const double r2 = (x - xp).squaredNorm();
  return spec.signal_variance * std::exp(-r2 / (2.0 * spec.lengthscale * spec.lengthscale));
}

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& xp) {
  const int dim = spec.dimension();
  check_point(x, dim);
  check_point(xp, dim);
  if (x.size() != xp.size()) throw std::invalid_argument("eval_kernel: dimension mismatch");
  if (!spec.is_sparse()) return base_kernel(spec, x, xp);

  const InducingSet& z = *spec.inducing;
  if (spec.family == KernelFamily::FIC && x == xp) return base_kernel(spec, x, xp);
  if (z.index_of(x) >= 0 || z.index_of(xp) >= 0) return base_kernel(spec, x, xp);
  const Eigen::VectorXd wx = z.factor().whiten(z.cross(x));
  if (x == xp) return wx.squaredNorm();
  return wx.dot(z.factor().whiten(z.cross(xp)));
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const PointList& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = eval_kernel(spec, points[i], points[j]);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

Eigen::VectorXd cross_vector(const KernelSpec& spec, const PointList& points, const Point& x) {
  Eigen::VectorXd k(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    k(static_cast<Eigen::Index>(i)) = eval_kernel(spec, x, points[i]);
  }
  return k;
}

SpdFactor factorize_gram(const KernelSpec& spec, const PointList& points, double extra_diag) {
  return SpdFactor(gram_matrix(spec, points), spec.jitter + extra_diag);
}

bool has_duplicates(const PointList& points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (points[i].size() == points[j].size() && points[i] == points[j]) return true;
    }
  }
  return false;
}

}  // namespace sgp
