#pragma once

#include <memory>

#include "radtomo/grid.hpp"
#include "radtomo/parameters.hpp"
#include "radtomo/quadrature.hpp"
#include "radtomo/types.hpp"

namespace radtomo {

/// Direction average: (theta phi)(cell, k) = sum_k' w_k' phi(cell, k') for
/// every k. Projects onto isotropic fields.
AngularFlux apply_theta(const AngularFlux& phi, const AngularQuadrature& quad);

/// Collision: mu*phi + sigma*(phi - theta phi), cell-wise.
AngularFlux apply_collision(const AngularFlux& phi, const ParameterPair& params,
                            const AngularQuadrature& quad);

/// First-order upwind finite-volume discretization of s . grad(phi).
/// Inflow faces take their value from `inflow`, interior faces from the
/// upwind cell.
AngularFlux apply_transport(const AngularFlux& phi, const BoundaryData& inflow,
                            const SpatialGrid& grid, const AngularQuadrature& quad);

/// Per-cell source produced by inflow boundary data: the |s.n| g / h
/// contributions of the inflow faces. Streaming systems see boundary data
/// only through this term.
AngularFlux inflow_source(const BoundaryData& inflow, const SpatialGrid& grid,
                          const AngularQuadrature& quad);

/// Restriction of phi to outflow (face, direction) pairs, taking the upwind
/// (owning cell) value; zero on the inflow half.
BoundaryData outflow_trace(const AngularFlux& phi, const SpatialGrid& grid,
                           const AngularQuadrature& quad);

/// Discrete L2 norms: cell area and quadrature weights on the phase space,
/// face length and |s.n| weights on the boundary halves.
Scalar flux_norm(const SpatialGrid& grid, const AngularQuadrature& quad, const AngularFlux& phi);
Scalar flux_inner(const SpatialGrid& grid, const AngularQuadrature& quad, const AngularFlux& u,
                  const AngularFlux& v);
Scalar inflow_norm(const SpatialGrid& grid, const AngularQuadrature& quad, const BoundaryData& g);
Scalar outflow_norm(const SpatialGrid& grid, const AngularQuadrature& quad, const BoundaryData& g);

/// Per-direction streaming-plus-removal systems (s_k . grad + mu + sigma)
/// under the upwind discretization. Each system is triangular in a
/// direction-dependent cell order, so solves are exact sweeps. Holds views
/// only; the grid, quadrature and parameters must outlive the operator.
class StreamingOperator {
 public:
  StreamingOperator(const SpatialGrid& grid, const AngularQuadrature& quad,
                    const ParameterPair& params);

  const SpatialGrid& grid() const { return *grid_; }
  const AngularQuadrature& quadrature() const { return *quad_; }
  const ParameterPair& parameters() const { return *params_; }

  /// Solves (A_k + diag(mu+sigma)) x_k = rhs_k for every direction.
  Matrix solve(const Matrix& rhs) const;
  /// Solves the transposed systems (reverse sweeps).
  Matrix solve_transposed(const Matrix& rhs) const;
  /// Weighted direction average of per-direction solves of one cell field:
  /// sum_k w_k L_k^{-1} rhs.
  Vector solve_isotropic(const Vector& rhs) const;
  /// Transposed variant: sum_k w_k L_k^{-T} rhs.
  Vector solve_isotropic_transposed(const Vector& rhs) const;

 private:
  void sweep(int k, const Eigen::Ref<const Vector>& rhs, Eigen::Ref<Vector> x,
             bool transposed) const;

  const SpatialGrid* grid_;
  const AngularQuadrature* quad_;
  const ParameterPair* params_;
  Vector removal_;                  // mu + sigma per cell
  std::vector<std::vector<int>> order_;  // traversal order per sign pattern
  std::vector<int> pattern_;        // sign pattern per direction
};

struct SolveOptions {
  Scalar rtol = 1e-10;       ///< relative residual target
  int max_iter = 10000;      ///< budget of scattering-source updates
  int plain_iterations = 5;  ///< source iterations before Krylov acceleration
};

struct SolveReport {
  int iterations = 0;     ///< scattering-source updates performed
  Scalar residual = 0;    ///< achieved relative residual
  bool accelerated = false;
};

/// Solves A phi + C phi = f with phi = g on the inflow boundary by source
/// iteration on the scattering source, switching to GMRES on the fixed-point
/// residual when plain iteration has not converged after a few rounds.
/// Throws SolverError when the budget is exhausted.
AngularFlux solve_forward(const ParameterPair& params, const AngularFlux& f,
                          const BoundaryData& g, const SpatialGrid& grid,
                          const AngularQuadrature& quad, const SolveOptions& opts = {},
                          SolveReport* report = nullptr);

/// Direct solver for the transport system at fixed parameters. Eliminates
/// the per-direction unknowns by sweeps, which leaves a dense linear system
/// for the isotropic scattering source; that matrix is LU-factored once and
/// reused, and its transpose factors the adjoint system as well. Intended
/// for repeated solves (measurement assembly, derivatives) on grids where a
/// dense cells-by-cells matrix is affordable.
class TransportFactorization {
 public:
  TransportFactorization(std::shared_ptr<const SpatialGrid> grid,
                         std::shared_ptr<const AngularQuadrature> quad,
                         std::shared_ptr<const ParameterPair> params);

  const SpatialGrid& grid() const { return *grid_; }
  const AngularQuadrature& quadrature() const { return *quad_; }
  const ParameterPair& parameters() const { return *params_; }
  const StreamingOperator& streaming() const { return streaming_; }

  /// Solves (A + C) x = rhs; inflow data must already be folded into rhs
  /// via inflow_source.
  AngularFlux solve(const AngularFlux& rhs) const;

  /// Solves the adjoint system blockdiag(A_k^T) + C, the adjoint of A + C
  /// in the cell-area x quadrature-weight inner product.
  AngularFlux solve_adjoint(const AngularFlux& rhs) const;

 private:
  std::shared_ptr<const SpatialGrid> grid_;
  std::shared_ptr<const AngularQuadrature> quad_;
  std::shared_ptr<const ParameterPair> params_;
  StreamingOperator streaming_;
  Eigen::PartialPivLU<Matrix> moment_lu_;  // I - diag(sigma) sum_k w_k L_k^{-1}
};

}  // namespace radtomo
