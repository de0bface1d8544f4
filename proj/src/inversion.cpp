#include "radtomo/inversion.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "radtomo/errors.hpp"
#include "radtomo/krylov.hpp"

namespace radtomo {

namespace {

void check_pair_size(const H1Metric& metric, const Vector& x, const char* where) {
  if (x.size() != 2 * metric.size())
    throw std::invalid_argument(std::string(where) + ": stacked vector size mismatch");
}

}  // namespace

Vector metric_apply_pair(const H1Metric& metric, const Vector& x) {
  check_pair_size(metric, x, "metric_apply_pair");
  const Index m = metric.size();
  Vector out(2 * m);
  out.head(m) = metric.apply(x.head(m));
  out.tail(m) = metric.apply(x.tail(m));
  return out;
}

Vector metric_solve_pair(const H1Metric& metric, const Vector& x) {
  check_pair_size(metric, x, "metric_solve_pair");
  const Index m = metric.size();
  Vector out(2 * m);
  out.head(m) = metric.solve(x.head(m));
  out.tail(m) = metric.solve(x.tail(m));
  return out;
}

Scalar metric_inner_pair(const H1Metric& metric, const Vector& x, const Vector& y) {
  check_pair_size(metric, x, "metric_inner_pair");
  const Index m = metric.size();
  return metric.inner(x.head(m), y.head(m)) + metric.inner(x.tail(m), y.tail(m));
}

Scalar metric_norm_pair(const H1Metric& metric, const Vector& x) {
  return std::sqrt(std::max<Scalar>(metric_inner_pair(metric, x, x), 0));
}

Scalar alpha_schedule(int n, Scalar alpha0, Scalar alpha_min) {
  if (n < 0) throw std::invalid_argument("alpha_schedule: negative index");
  return std::max(alpha0 * std::exp2(-static_cast<Scalar>(n)), alpha_min);
}

Vector project(const Vector& x, const Vector& lower, const Vector& upper) {
  if (x.size() != lower.size() || x.size() != upper.size())
    throw std::invalid_argument("project: bound size mismatch");
  return x.cwiseMax(lower).cwiseMin(upper);
}

Scalar tikhonov_value(const Vector& x, TikhonovProblem& prob, Scalar alpha) {
  const Vector resid = prob.model->evaluate(x) - prob.data;
  const Vector offset = x - prob.prior;
  return resid.squaredNorm() + alpha * metric_inner_pair(*prob.metric, offset, offset);
}

Vector tikhonov_gradient(const Vector& x, TikhonovProblem& prob, Scalar alpha) {
  const Vector resid = prob.model->linearize_at(x) - prob.data;
  const Vector misfit_grad =
      metric_solve_pair(*prob.metric, 2 * prob.model->apply_jacobian_transpose(resid));
  return misfit_grad + 2 * alpha * (x - prob.prior);
}

PgnStep pgn_step(const Vector& x, TikhonovProblem& prob, Scalar alpha) {
  ForwardMap& model = *prob.model;
  const H1Metric& metric = *prob.metric;

  PgnStep step;
  step.model_value = model.linearize_at(x);

  // Solved in the offset from the prior, eta = x_hat - prior, which turns the
  // normal equations
  //   (F'^T F' + alpha G)(x_hat - x) = F'^T (data - F(x)) + alpha G (prior - x)
  // into the algebraically identical system
  //   (F'^T F' + alpha G) eta = F'^T [ (data - F(x)) + F' (x - prior) ].
  // Its right-hand side lies in the range of F'^T, so conjugate gradients do
  // not lose accuracy to the regularizer null space when alpha is tiny.
  const Vector rhs = model.apply_jacobian_transpose(prob.data - step.model_value +
                                                    model.apply_jacobian(x - prob.prior));

  const auto normal_op = [&](const Vector& v) -> Vector {
    return model.apply_jacobian_transpose(model.apply_jacobian(v)) +
           alpha * metric_apply_pair(metric, v);
  };
  const auto precond = [&](const Vector& r) -> Vector {
    return metric_solve_pair(metric, r);
  };

  Vector eta = Vector::Zero(x.size());
  const KrylovResult cg = pcg(normal_op, precond, rhs, eta, prob.cg_tol, prob.cg_max);
  step.cg_iterations = cg.iterations;
  step.cg_residual = rhs.norm() > 0 ? cg.residual / rhs.norm() : 0;
  if (!cg.converged) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", step.cg_residual);
    throw SolverError(std::string("pgn_step: cg stalled at relative residual ") + buf,
                      step.cg_residual);
  }

  step.candidate = prob.prior + eta;
  step.projected = project(step.candidate, prob.lower, prob.upper);
  return step;
}

PgnResult run_pgn(TikhonovProblem& prob, const Vector& x_start, Scalar alpha_target,
                  const IterationCallback& on_iterate) {
  const H1Metric& metric = *prob.metric;
  const Index m = metric.size();
  const Scalar target = std::max(alpha_target, prob.alpha_min);

  PgnResult result;
  result.x = x_start;
  for (int n = 0;; ++n) {
    const Scalar alpha = std::max(alpha_schedule(n, prob.alpha0, prob.alpha_min), target);
    if (on_iterate) on_iterate(n, result.x);

    PgnStep step;
    try {
      step = pgn_step(result.x, prob, alpha);
    } catch (const SolverError& e) {
      throw SolverError("run_pgn: iteration " + std::to_string(n) + ": " + e.what(),
                        e.achieved_residual());
    }

    IterationRecord rec;
    rec.n = n;
    rec.alpha = alpha;
    const Vector offset = result.x - prob.prior;
    rec.residual = (step.model_value - prob.data).norm();
    rec.tikhonov = rec.residual * rec.residual +
                   alpha * metric_inner_pair(metric, offset, offset);
    rec.step_norm = metric_norm_pair(metric, step.projected - result.x);
    for (Index i = 0; i < m; ++i) {
      if (step.projected[i] != step.candidate[i]) ++rec.active_mu;
      if (step.projected[m + i] != step.candidate[m + i]) ++rec.active_sigma;
    }

    const Scalar x_scale = metric_norm_pair(metric, result.x);
    const bool alpha_reached = alpha <= target * (1 + Scalar(1e-12));
    const bool small_step = rec.step_norm <= prob.step_tol * (1 + x_scale);
    result.x = step.projected;
    result.history.push_back(rec);
    if (alpha_reached && (small_step || n >= prob.max_outer)) break;
  }
  return result;
}

void save_iteration_records(const std::string& path,
                            const std::vector<IterationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "n,alpha,res,tikhonov,step_norm,active_mu,active_sigma\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%d,%d\n", r.n, r.alpha,
                  r.residual, r.tikhonov, r.step_norm, r.active_mu, r.active_sigma);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace radtomo
