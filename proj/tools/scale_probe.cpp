// Development probe: spectrum scale of the measurement jacobian at the prior,
// measurement magnitudes, and single-solve timings at desk scale.
#include <chrono>
#include <iostream>

#include "radtomo/experiments.hpp"
#include "radtomo/inversion.hpp"

using namespace radtomo;
using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main() {
  ExperimentConfig cfg;
  const auto grid = std::make_shared<SpatialGrid>(make_grid(cfg));
  const auto quad = std::make_shared<AngularQuadrature>(make_quadrature(cfg));
  std::cout << "cells: " << grid->num_cells() << ", faces: " << grid->num_faces() << "\n";

  auto model = make_model(cfg, grid, quad);
  const H1Metric metric(*grid);
  const Vector prior = MeasurementForwardMap::pack(prior_parameters(cfg, *grid));

  auto t0 = Clock::now();
  const Vector f_prior = model->linearize_at(prior);
  std::cout << "linearize_at: " << ms_since(t0) << " ms\n";
  std::cout << "measurement range at prior: max " << f_prior.maxCoeff() << ", min "
            << f_prior.minCoeff() << ", norm " << f_prior.norm() << "\n";

  const Vector phantom = MeasurementForwardMap::pack(phantom_parameters(cfg, *grid));
  const Vector f_ph = model->evaluate(phantom);
  std::cout << "phantom misfit vs prior: " << (f_ph - f_prior).norm() << "\n";

  // power iteration for the top eigenvalue of G^{-1} J^T J in the G geometry
  t0 = Clock::now();
  Vector v = Vector::Ones(model->parameter_size());
  v /= metric_norm_pair(metric, v);
  double lambda = 0;
  for (int it = 0; it < 30; ++it) {
    const Vector jv = model->apply_jacobian(v);
    lambda = jv.squaredNorm();  // = <v, G^{-1}J^TJ v>_G for normalized v
    Vector u = metric_solve_pair(metric, model->apply_jacobian_transpose(jv));
    v = u / metric_norm_pair(metric, u);
  }
  std::cout << "top eigenvalue of G^{-1}J^TJ at prior: " << lambda << "  ("
            << ms_since(t0) << " ms for 30 iterations)\n";

  // one pgn step timing at a mid alpha
  TikhonovProblem prob = make_problem(cfg, model, f_ph);
  t0 = Clock::now();
  const PgnStep step = pgn_step(prior, prob, 1e-4);
  std::cout << "pgn step at alpha=1e-4: " << ms_since(t0) << " ms, cg iters "
            << step.cg_iterations << "\n";
  return 0;
}
