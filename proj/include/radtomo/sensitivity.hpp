#pragma once

#include <memory>

#include "radtomo/transport.hpp"

namespace radtomo {

/// Frozen first-order state of the parameter-to-flux map at one parameter
/// point for one excitation (f, g): the base flux together with a transport
/// factorization for the derivative solves. Immutable and shareable across
/// threads; several linearizations (one per source) can share one
/// factorization.
class ForwardLinearization {
 public:
  ForwardLinearization(std::shared_ptr<const TransportFactorization> fact,
                       AngularFlux base_flux)
      : fact_(std::move(fact)), base_flux_(std::move(base_flux)) {}

  const TransportFactorization& factorization() const { return *fact_; }
  std::shared_ptr<const TransportFactorization> factorization_ptr() const { return fact_; }
  const ParameterPair& parameters() const { return fact_->parameters(); }
  const AngularFlux& base_flux() const { return base_flux_; }

 private:
  std::shared_ptr<const TransportFactorization> fact_;
  AngularFlux base_flux_;
};

/// Solves the forward problem at `params` and keeps the state needed for
/// Jacobian, adjoint and Hessian applications.
ForwardLinearization linearize(const ParameterPair& params, const AngularFlux& f,
                               const BoundaryData& g, const SpatialGrid& grid,
                               const AngularQuadrature& quad);

/// Variant reusing an existing factorization (same parameters, new data).
ForwardLinearization linearize(std::shared_ptr<const TransportFactorization> fact,
                               const AngularFlux& f, const BoundaryData& g);

/// Parameter-linear part of the collision operator applied to a flux:
/// var.mu * phi + var.sigma * (phi - theta phi).
AngularFlux collision_action(const ParameterVariation& var, const AngularFlux& phi,
                             const AngularQuadrature& quad);

/// Directional derivative of the parameter-to-flux map: the unique w with
///   (A + C) w = -collision_action(var, base_flux),  w = 0 on the inflow set.
AngularFlux apply_jacobian(const ForwardLinearization& lin, const ParameterVariation& var);

/// Adjoint of apply_jacobian with respect to the cell-area/quadrature-weight
/// inner products: solves the adjoint transport system for the costate and
/// reduces it against the base flux,
///   g_mu(c)    = -sum_k w_k phi(c,k) lambda(c,k)
///   g_sigma(c) = -sum_k w_k (phi - theta phi)(c,k) lambda(c,k).
ParameterVariation apply_adjoint(const ForwardLinearization& lin, const AngularFlux& costate_src);

/// Second derivative: bilinear and symmetric in (a, b), zero inflow data.
AngularFlux apply_hessian(const ForwardLinearization& lin, const ParameterVariation& a,
                          const ParameterVariation& b);

}  // namespace radtomo
