#include "lincmdp/linalg.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lincmdp {

namespace {

constexpr double kNegativeQuadTol = 1e-12;

#ifndef NDEBUG
constexpr long kRebaselineEvery = 10000;
#endif

}  // namespace

DesignMatrix::DesignMatrix(int dim) {
  if (dim <= 0) throw ConfigError("DesignMatrix: dimension must be positive");
  gram_ = Matrix::Identity(dim, dim);
  inverse_ = Matrix::Identity(dim, dim);
}

void DesignMatrix::rank_one_update(const Vector& phi) {
  require(phi.size() == gram_.rows(), "rank_one_update: dimension mismatch");
  const Vector u = inverse_ * phi;
  const double quad = std::max(phi.dot(u), 0.0);
  const double denom = 1.0 + quad;
  gram_.noalias() += phi * phi.transpose();
  inverse_.noalias() -= (u * u.transpose()) / denom;
  inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
  logdet_ += std::log1p(quad);
  ++updates_;
#ifndef NDEBUG
  if (updates_ % kRebaselineEvery == 0) {
    const Matrix dense = gram_.inverse();
    require((dense - inverse_).cwiseAbs().maxCoeff() <= 1e-6, "DesignMatrix: incremental inverse drifted");
    inverse_ = 0.5 * (dense + dense.transpose());
  }
#endif
}

double DesignMatrix::quadratic_form(const Vector& phi) const {
  const double q = phi.dot(inverse_ * phi);
  if (q < 0.0) {
    require(q >= -kNegativeQuadTol, "mahalanobis: negative quadratic form " + std::to_string(q));
    return 0.0;
  }
  return q;
}

double DesignMatrix::mahalanobis(const Vector& phi) const { return std::sqrt(quadratic_form(phi)); }

bool epoch_trigger(const DesignMatrix& current, double anchor_logdet) {
  return current.logdet() - anchor_logdet >= std::numbers::ln2 - 1e-12;
}

}  // namespace lincmdp
