#include "radtomo/sensitivity.hpp"

#include <stdexcept>

namespace radtomo {

ForwardLinearization linearize(const ParameterPair& params, const AngularFlux& f,
                               const BoundaryData& g, const SpatialGrid& grid,
                               const AngularQuadrature& quad) {
  auto fact = std::make_shared<TransportFactorization>(
      std::make_shared<SpatialGrid>(grid), std::make_shared<AngularQuadrature>(quad),
      std::make_shared<ParameterPair>(params));
  return linearize(std::move(fact), f, g);
}

ForwardLinearization linearize(std::shared_ptr<const TransportFactorization> fact,
                               const AngularFlux& f, const BoundaryData& g) {
  const AngularFlux rhs = f + inflow_source(g, fact->grid(), fact->quadrature());
  AngularFlux base = fact->solve(rhs);
  return ForwardLinearization(std::move(fact), std::move(base));
}

AngularFlux collision_action(const ParameterVariation& var, const AngularFlux& phi,
                             const AngularQuadrature& quad) {
  if (var.mu.size() != phi.rows() || var.sigma.size() != phi.rows())
    throw std::invalid_argument("collision_action: variation size mismatch");
  const AngularFlux aniso = phi - apply_theta(phi, quad);
  return var.mu.asDiagonal() * phi + var.sigma.asDiagonal() * aniso;
}

AngularFlux apply_jacobian(const ForwardLinearization& lin, const ParameterVariation& var) {
  const auto& fact = lin.factorization();
  const AngularFlux rhs = -collision_action(var, lin.base_flux(), fact.quadrature());
  return fact.solve(rhs);
}

ParameterVariation apply_adjoint(const ForwardLinearization& lin,
                                 const AngularFlux& costate_src) {
  const auto& fact = lin.factorization();
  const auto& quad = fact.quadrature();
  const AngularFlux lambda = fact.solve_adjoint(costate_src);
  const AngularFlux& phi = lin.base_flux();
  ParameterVariation grad;
  grad.mu = -(phi.cwiseProduct(lambda) * quad.weights);
  const AngularFlux aniso = phi - apply_theta(phi, quad);
  grad.sigma = -(aniso.cwiseProduct(lambda) * quad.weights);
  return grad;
}

AngularFlux apply_hessian(const ForwardLinearization& lin, const ParameterVariation& a,
                          const ParameterVariation& b) {
  const auto& fact = lin.factorization();
  const auto& quad = fact.quadrature();
  const AngularFlux wa = apply_jacobian(lin, a);
  const AngularFlux wb = apply_jacobian(lin, b);
  // Differentiating the sensitivity equation once more gives the right-hand
  // side below; the sign is pinned by the second-order Taylor tests.
  const AngularFlux rhs = -(collision_action(a, wb, quad) + collision_action(b, wa, quad));
  return fact.solve(rhs);
}

}  // namespace radtomo
