#pragma once

#include <cmath>

#include "radtomo/types.hpp"

namespace radtomo {

struct KrylovResult {
  int iterations = 0;
  Scalar residual = 0;  ///< final residual norm (absolute)
  bool converged = false;
};

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
/// `apply` maps a Vector to a Vector; convergence is tested against the
/// absolute tolerance `tol_abs`. `x` carries the initial guess in and the
/// solution out.
template <class Op>
KrylovResult gmres(const Op& apply, const Vector& b, Vector& x, Scalar tol_abs, int max_iter,
                   int restart = 200) {
  const Index n = b.size();
  KrylovResult out;
  if (restart > max_iter) restart = max_iter;
  if (restart > n) restart = static_cast<int>(n);

  Matrix basis(n, restart + 1);
  Matrix hess = Matrix::Zero(restart + 1, restart);
  Vector cs(restart), sn(restart), rhs(restart + 1);

  while (out.iterations < max_iter) {
    Vector r = b - apply(x);
    Scalar beta = r.norm();
    out.residual = beta;
    if (beta <= tol_abs) {
      out.converged = true;
      return out;
    }
    basis.col(0) = r / beta;
    rhs.setZero();
    rhs[0] = beta;

    int j = 0;
    for (; j < restart && out.iterations < max_iter; ++j) {
      ++out.iterations;
      Vector w = apply(basis.col(j));
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(w);
        w -= hess(i, j) * basis.col(i);
      }
      hess(j + 1, j) = w.norm();
      const bool breakdown = hess(j + 1, j) <= Scalar(1e-300);
      if (!breakdown) basis.col(j + 1) = w / hess(j + 1, j);

      for (int i = 0; i < j; ++i) {  // apply previous rotations
        const Scalar t = cs[i] * hess(i, j) + sn[i] * hess(i + 1, j);
        hess(i + 1, j) = -sn[i] * hess(i, j) + cs[i] * hess(i + 1, j);
        hess(i, j) = t;
      }
      const Scalar denom = std::hypot(hess(j, j), hess(j + 1, j));
      cs[j] = hess(j, j) / denom;
      sn[j] = hess(j + 1, j) / denom;
      hess(j, j) = denom;
      hess(j + 1, j) = 0;
      rhs[j + 1] = -sn[j] * rhs[j];
      rhs[j] = cs[j] * rhs[j];

      out.residual = std::abs(rhs[j + 1]);
      if (out.residual <= tol_abs || breakdown) {
        ++j;
        break;
      }
    }
    // solve the triangular least-squares system and update x
    Vector y = hess.topLeftCorner(j, j).template triangularView<Eigen::Upper>().solve(
        rhs.head(j));
    x += basis.leftCols(j) * y;
    if (out.residual <= tol_abs) {
      out.converged = true;
      return out;
    }
  }
  // report the true residual on exit
  out.residual = (b - apply(x)).norm();
  out.converged = out.residual <= tol_abs;
  return out;
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. Convergence is measured by the Euclidean residual relative to
/// the right-hand side norm.
template <class Op, class Prec>
KrylovResult pcg(const Op& apply, const Prec& precond, const Vector& b, Vector& x,
                 Scalar tol_rel, int max_iter) {
  KrylovResult out;
  const Scalar bnorm = b.norm();
  if (bnorm == 0) {
    x.setZero();
    out.converged = true;
    return out;
  }
  const Scalar tol_abs = tol_rel * bnorm;

  Vector r = b - apply(x);
  out.residual = r.norm();
  if (out.residual <= tol_abs) {
    out.converged = true;
    return out;
  }
  Vector z = precond(r);
  Vector p = z;
  Scalar rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    const Vector ap = apply(p);
    const Scalar pap = p.dot(ap);
    if (!(pap > 0)) break;  // lost positive definiteness numerically
    const Scalar alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    ++out.iterations;
    out.residual = r.norm();
    if (out.residual <= tol_abs) {
      out.converged = true;
      return out;
    }
    z = precond(r);
    const Scalar rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return out;
}

}  // namespace radtomo
