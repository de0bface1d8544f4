#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "radtomo/config.hpp"
#include "radtomo/forward_map.hpp"

namespace radtomo {

SpatialGrid make_grid(const ExperimentConfig& cfg);
AngularQuadrature make_quadrature(const ExperimentConfig& cfg);
SourceSet make_sources(const ExperimentConfig& cfg);
DetectorSet make_detectors(const ExperimentConfig& cfg);
ParameterPair phantom_parameters(const ExperimentConfig& cfg, const SpatialGrid& grid);
ParameterPair prior_parameters(const ExperimentConfig& cfg, const SpatialGrid& grid);

std::shared_ptr<MeasurementForwardMap> make_model(const ExperimentConfig& cfg);
std::shared_ptr<MeasurementForwardMap> make_model(const ExperimentConfig& cfg,
                                                  std::shared_ptr<const SpatialGrid> grid,
                                                  std::shared_ptr<const AngularQuadrature> quad);
TikhonovProblem make_problem(const ExperimentConfig& cfg,
                             std::shared_ptr<MeasurementForwardMap> model, Vector data);

struct CheckLine {
  std::string name;
  Scalar measured = 0;
  std::string requirement;
  bool pass = false;
};

struct CheckReport {
  std::vector<CheckLine> lines;
  bool all_pass() const;
};

/// Consistency suites: adjoint identity, Taylor slopes, gradient finite
/// differences, and the linear-surrogate Gauss-Newton oracle. Prints one
/// line per check to `log`.
CheckReport run_check(const ExperimentConfig& cfg, unsigned seed, std::ostream& log);

struct CalibrationSummary {
  Scalar relative_misfit = 0;  ///< ||F(x_dagger) - M_phantom|| / ||M_phantom||
  int iterations = 0;
};

/// Twin-data calibration: generates phantom data, minimizes down to
/// alpha_min, stores the calibrated fields and their exactly attainable
/// measurements under `out_dir`.
CalibrationSummary run_calibrate(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::ostream& log);

struct RateTable {
  Vector alphas;  ///< strictly decreasing
  Vector res;     ///< data residual per alpha
  Vector err;     ///< H1 distance to the calibrated parameters per alpha
  Scalar res_slope = 0;  ///< log-log least-squares slopes over all rows
  Scalar err_slope = 0;

  /// Slopes refitted on the sub-range alpha in [lo, hi].
  Scalar fit_res_slope(Scalar lo, Scalar hi) const;
  Scalar fit_err_slope(Scalar lo, Scalar hi) const;
};

/// Convergence-rate study against the calibration artifacts in `out_dir`.
RateTable run_rates(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);

struct PgnStudy {
  std::vector<IterationRecord> records;  ///< restart run, residual at x_n
  Vector err;             ///< || x_n - x_alpha ||_H1 per iterate
  int burn_in = 0;        ///< iterations until alpha_n reaches the fixed alpha
  Scalar tail_ratio = 1;  ///< fitted geometric ratio of err on the tail
};

/// Fixed-alpha convergence study: computes the minimizer at `alpha_fixed`,
/// restarts from the prior and records residuals and distances per iterate.
PgnStudy run_pgn_study(const ExperimentConfig& cfg, const std::string& out_dir,
                       Scalar alpha_fixed, std::ostream& log);

/// Standalone forward solves on the phantom: writes per-direction flux
/// slices, the direction-averaged flux, boundary outflow densities and the
/// assembled measurement matrix.
void run_forward_dump(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::ostream& log);

}  // namespace radtomo
