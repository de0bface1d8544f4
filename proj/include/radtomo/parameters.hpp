#pragma once

#include <stdexcept>

#include "radtomo/grid.hpp"
#include "radtomo/types.hpp"

namespace radtomo {

/// Cell-wise absorption and scattering rates (1/mm) with their box bounds.
/// A pair is admissible when 0 <= mu <= mu_max and 0 <= sigma <= sigma_max
/// on every cell; mu_max = sigma_max = 0 (pure streaming) is legal.
struct ParameterPair {
  Vector mu;
  Vector sigma;
  Scalar mu_max = 0;
  Scalar sigma_max = 0;
};

/// Direction in parameter space; same cell layout, unconstrained sign.
struct ParameterVariation {
  Vector mu;
  Vector sigma;
};

inline ParameterPair constant_parameters(const SpatialGrid& grid, Scalar mu, Scalar sigma,
                                         Scalar mu_max, Scalar sigma_max) {
  ParameterPair p;
  p.mu = Vector::Constant(grid.num_cells(), mu);
  p.sigma = Vector::Constant(grid.num_cells(), sigma);
  p.mu_max = mu_max;
  p.sigma_max = sigma_max;
  return p;
}

inline bool in_domain(const ParameterPair& p, Scalar tol = 0) {
  return p.mu.minCoeff() >= -tol && p.mu.maxCoeff() <= p.mu_max + tol &&
         p.sigma.minCoeff() >= -tol && p.sigma.maxCoeff() <= p.sigma_max + tol;
}

inline void require_in_domain(const ParameterPair& p, const char* where) {
  if (p.mu.size() != p.sigma.size())
    throw std::invalid_argument(std::string(where) + ": mu/sigma size mismatch");
  if (!in_domain(p, Scalar(1e-12)))
    throw std::invalid_argument(std::string(where) + ": parameters violate their box bounds");
}

}  // namespace radtomo
