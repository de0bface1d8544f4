#pragma once

#include "radtomo/grid.hpp"
#include "radtomo/types.hpp"

namespace radtomo {

/// Discrete H1 inner product on the masked grid: cell-area mass plus the
/// Gram matrix of one-sided difference quotients across interior cell
/// faces (natural treatment at the staircase boundary). Symmetric positive
/// definite; constants see only the mass part, so <c, c> = c^2 * area.
class H1Metric {
 public:
  explicit H1Metric(const SpatialGrid& grid);

  Index size() const { return gram_.rows(); }
  const SparseMatrix& gram() const { return gram_; }
  Vector apply(const Vector& u) const { return gram_ * u; }
  Vector solve(const Vector& u) const { return llt_.solve(u); }
  Scalar inner(const Vector& u, const Vector& v) const { return u.dot(gram_ * v); }
  Scalar norm(const Vector& u) const { return std::sqrt(std::max<Scalar>(inner(u, u), 0)); }

 private:
  SparseMatrix gram_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
};

}  // namespace radtomo
