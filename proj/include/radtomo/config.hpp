#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "radtomo/types.hpp"

namespace radtomo {

/// Circular inclusion stamped onto a background field.
struct Inclusion {
  Scalar cx = 0, cy = 0, r = 0, value = 0;
  bool operator==(const Inclusion&) const = default;
};

/// Complete experiment description. Defaults reproduce the desk-scale setup;
/// every field can be overridden from the sectioned key-value config file.
struct ExperimentConfig {
  // [grid]
  int n = 32;
  Scalar radius = 25;

  // [quadrature]
  int n_dir = 16;

  // [phantom]
  Scalar mu_background = 0.01;
  Scalar sigma_background = 10;
  std::vector<Inclusion> mu_inclusions{{-8, 6, 6, 0.04}};
  std::vector<Inclusion> sigma_inclusions{{7, -5, 7, 30}};

  // [sources]
  int source_count = 8;
  Scalar source_arc_fraction = 0.25;
  Scalar source_amplitude = 10;
  Scalar source_offset_deg = 0;

  // [detectors]
  int detector_count = 8;
  Scalar detector_arc_fraction = 0.25;
  Scalar detector_offset_deg = 22.5;

  // [regularization]
  Scalar mu_prior = 0.015;
  Scalar sigma_prior = 15;
  Scalar mu_max = 0.1;
  Scalar sigma_max = 60;
  Scalar alpha0 = 1e-2;
  Scalar alpha_min = 1e-10;
  Scalar alpha_pgn = 1e-5;
  std::vector<Scalar> rate_alphas{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};

  // [solver]
  Scalar rtol = 1e-10;
  int max_iter = 10000;
  Scalar cg_tol = 1e-8;
  int cg_max = 500;
  Scalar step_tol = 1e-6;
  int max_outer = 60;
  unsigned seed = 1;
  std::string out_dir = "out";
  bool break_adjoint = false;  // test hook: corrupts the adjoint inside `check`

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a sectioned key-value file. Unknown sections or keys, malformed
/// values and out-of-range settings raise ConfigError with file and line.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in, const std::string& name);

/// Canonical text form; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);
void save_config(const std::string& path, const ExperimentConfig& cfg);

/// Range checks shared by load and programmatic construction.
void validate_config(const ExperimentConfig& cfg, const std::string& name = "config");

}  // namespace radtomo
