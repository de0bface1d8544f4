#include "radtomo/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace radtomo {

AngularQuadrature build_quadrature(int n_dir) {
  if (n_dir < 4) throw std::invalid_argument("build_quadrature: need at least 4 directions");
  if (n_dir % 2 != 0) throw std::invalid_argument("build_quadrature: direction count must be even");

  AngularQuadrature quad;
  quad.angles.resize(n_dir);
  quad.directions.resize(n_dir, 2);
  quad.weights = Vector::Constant(n_dir, Scalar(1) / n_dir);
  for (int k = 0; k < n_dir; ++k) {
    const Scalar theta = 2 * std::numbers::pi_v<Scalar> * (k + Scalar(0.5)) / n_dir;
    quad.angles[k] = theta;
    quad.directions(k, 0) = std::cos(theta);
    quad.directions(k, 1) = std::sin(theta);
  }
  return quad;
}

}  // namespace radtomo
