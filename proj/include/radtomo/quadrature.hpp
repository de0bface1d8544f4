#pragma once

#include "radtomo/types.hpp"

namespace radtomo {

/// Equi-spaced direction set on the unit circle with normalized weights
/// (the direction integral is treated as a probability average, so the
/// weights sum to one).
struct AngularQuadrature {
  Vector angles;      ///< K direction angles
  Matrix directions;  ///< K x 2 unit vectors (cos, sin)
  Vector weights;     ///< K positive weights, sum 1

  Index size() const { return weights.size(); }
};

/// Builds the direction set theta_k = 2*pi*(k + 1/2)/n_dir, w_k = 1/n_dir.
/// The half offset keeps directions off the grid axes. Requires n_dir >= 4
/// and even so that every direction has its antipode in the set.
AngularQuadrature build_quadrature(int n_dir);

}  // namespace radtomo
