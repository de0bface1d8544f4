#pragma once

#include <random>

#include "radtomo/grid.hpp"
#include "radtomo/parameters.hpp"
#include "radtomo/quadrature.hpp"
#include "radtomo/types.hpp"

namespace radtomo::testing {

inline Vector random_vector(std::mt19937_64& rng, Index n, Scalar lo = -1, Scalar hi = 1) {
  std::uniform_real_distribution<Scalar> dist(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, Scalar lo = -1,
                            Scalar hi = 1) {
  std::uniform_real_distribution<Scalar> dist(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline ParameterPair random_parameters(std::mt19937_64& rng, const SpatialGrid& grid,
                                       Scalar mu_max, Scalar sigma_max) {
  ParameterPair p;
  p.mu = random_vector(rng, grid.num_cells(), 0, mu_max);
  p.sigma = random_vector(rng, grid.num_cells(), 0, sigma_max);
  p.mu_max = mu_max;
  p.sigma_max = sigma_max;
  return p;
}

/// Least-squares slope of y against x.
inline Scalar fit_slope(const Vector& x, const Vector& y) {
  const Scalar xm = x.mean();
  const Scalar ym = y.mean();
  const Vector dx = x.array() - xm;
  const Vector dy = y.array() - ym;
  return dx.dot(dy) / dx.squaredNorm();
}

}  // namespace radtomo::testing
