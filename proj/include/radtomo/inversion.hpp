#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "radtomo/h1.hpp"
#include "radtomo/types.hpp"

namespace radtomo {

/// Differentiable map from a stacked parameter vector [mu; sigma] to a
/// flattened data vector, as consumed by the Gauss-Newton driver. The
/// linearization point is explicit state so that repeated Jacobian and
/// transpose applications reuse the factorized forward operator.
class ForwardMap {
 public:
  virtual ~ForwardMap() = default;
  virtual Index parameter_size() const = 0;
  virtual Index data_size() const = 0;
  /// F(x) without touching the linearization point.
  virtual Vector evaluate(const Vector& x) = 0;
  /// Re-centers the linearization at x; returns F(x).
  virtual Vector linearize_at(const Vector& x) = 0;
  /// F'(x) h at the current linearization point.
  virtual Vector apply_jacobian(const Vector& h) const = 0;
  /// Euclidean transpose F'(x)^T y.
  virtual Vector apply_jacobian_transpose(const Vector& y) const = 0;
};

/// Data, prior, bounds and solver knobs of one Tikhonov minimization
///   || F(x) - data ||_2^2 + alpha * || x - prior ||_{H1 x H1}^2
/// over the box lower <= x <= upper.
struct TikhonovProblem {
  std::shared_ptr<ForwardMap> model;
  Vector data;
  Vector prior;          ///< regularization center and default start
  Vector lower, upper;   ///< component-wise bounds
  std::shared_ptr<const H1Metric> metric;  ///< per-half metric on [mu; sigma]

  Scalar alpha0 = 1e-2;
  Scalar alpha_min = 1e-10;
  Scalar cg_tol = 1e-8;
  int cg_max = 500;
  Scalar step_tol = 1e-6;
  int max_outer = 60;
};

// The metric acts block-wise on stacked [mu; sigma] vectors.
Vector metric_apply_pair(const H1Metric& metric, const Vector& x);
Vector metric_solve_pair(const H1Metric& metric, const Vector& x);
Scalar metric_inner_pair(const H1Metric& metric, const Vector& x, const Vector& y);
Scalar metric_norm_pair(const H1Metric& metric, const Vector& x);

/// Geometrically decaying regularization schedule max(alpha0 / 2^n, alpha_min).
Scalar alpha_schedule(int n, Scalar alpha0, Scalar alpha_min);

/// Component-wise clip into the box (the cheap stand-in for the metric
/// projection onto the admissible set).
Vector project(const Vector& x, const Vector& lower, const Vector& upper);

Scalar tikhonov_value(const Vector& x, TikhonovProblem& prob, Scalar alpha);

/// Riesz gradient in the H1 geometry:
///   G^{-1} [2 F'(x)^T (F(x) - data)] + 2 alpha (x - prior).
Vector tikhonov_gradient(const Vector& x, TikhonovProblem& prob, Scalar alpha);

struct PgnStep {
  Vector candidate;   ///< x + delta before projection
  Vector projected;   ///< candidate clipped into the box
  Vector model_value; ///< F(x) at the expansion point
  int cg_iterations = 0;
  Scalar cg_residual = 0;  ///< relative residual achieved by the inner solve
};

/// One Gauss-Newton step: solves the regularized normal equations
///   (F'^T F' + alpha G) delta = F'^T (data - F(x)) + alpha G (prior - x)
/// by G-preconditioned conjugate gradients on the symmetric positive
/// definite operator (formulated in the offset from the prior, which is the
/// same system with a range-space right-hand side), then projects the
/// update into the box.
PgnStep pgn_step(const Vector& x, TikhonovProblem& prob, Scalar alpha);

struct IterationRecord {
  int n = 0;
  Scalar alpha = 0;
  Scalar residual = 0;   ///< || F(x_n) - data ||_2
  Scalar tikhonov = 0;   ///< Tikhonov value at x_n for alpha_n
  Scalar step_norm = 0;  ///< H1 norm of x_{n+1} - x_n
  int active_mu = 0;     ///< mu cells moved by the projection
  int active_sigma = 0;
};

struct PgnResult {
  Vector x;
  std::vector<IterationRecord> history;
};

/// Observer invoked with (n, x_n) before each step.
using IterationCallback = std::function<void(int, const Vector&)>;

/// Runs the projected Gauss-Newton iteration with alpha_n floored at
/// alpha_target. Stops once alpha_n has reached the target and either the
/// step norm dropped below step_tol * (1 + ||x_n||) or n hit max_outer.
PgnResult run_pgn(TikhonovProblem& prob, const Vector& x_start, Scalar alpha_target,
                  const IterationCallback& on_iterate = {});

/// CSV with columns n,alpha,res,tikhonov,step_norm,active_mu,active_sigma.
void save_iteration_records(const std::string& path, const std::vector<IterationRecord>& records);

}  // namespace radtomo
