#pragma once

#include "lincmdp/common.hpp"

namespace lincmdp {

/// Regularized Gram matrix Lambda = I + sum phi phi^T with its inverse and
/// log-determinant maintained under rank-one updates (Sherman-Morrison).
class DesignMatrix {
 public:
  /// Lambda = inv = I, logdet = 0. Rejects dim <= 0.
  explicit DesignMatrix(int dim);

  int dim() const { return static_cast<int>(gram_.rows()); }
  const Matrix& gram() const { return gram_; }
  const Matrix& inverse() const { return inverse_; }
  double logdet() const { return logdet_; }
  long num_updates() const { return updates_; }

  /// Lambda += phi phi^T; inverse and logdet follow incrementally.
  void rank_one_update(const Vector& phi);

  /// phi^T Lambda^{-1} phi, clamped at 0 for round-off negatives.
  double quadratic_form(const Vector& phi) const;

  /// ||phi||_{Lambda^{-1}}.
  double mahalanobis(const Vector& phi) const;

 private:
  Matrix gram_;
  Matrix inverse_;
  double logdet_ = 0.0;
  long updates_ = 0;
};

/// True when det(current) >= 2 det(anchor), tested in log space.
bool epoch_trigger(const DesignMatrix& current, double anchor_logdet);

}  // namespace lincmdp
