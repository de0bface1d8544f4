#include "radtomo/transport.hpp"

#include <cmath>
#include <stdexcept>

#include "radtomo/errors.hpp"
#include "radtomo/krylov.hpp"

namespace radtomo {

namespace {

void check_flux_shape(const AngularFlux& phi, const SpatialGrid& grid,
                      const AngularQuadrature& quad, const char* where) {
  if (phi.rows() != grid.num_cells() || phi.cols() != quad.size())
    throw std::invalid_argument(std::string(where) + ": flux shape mismatch");
}

void check_boundary_shape(const BoundaryData& g, const SpatialGrid& grid,
                          const AngularQuadrature& quad, const char* where) {
  if (g.rows() != grid.num_faces() || g.cols() != quad.size())
    throw std::invalid_argument(std::string(where) + ": boundary data shape mismatch");
}

}  // namespace

AngularFlux apply_theta(const AngularFlux& phi, const AngularQuadrature& quad) {
  if (phi.cols() != quad.size())
    throw std::invalid_argument("apply_theta: direction count mismatch");
  // Average relative to the first direction so that isotropic inputs are
  // reproduced bit-exactly (the weights sum to one), keeping theta an exact
  // projection.
  const Matrix spread = phi.colwise() - phi.col(0);
  const Vector mean = phi.col(0) + spread * quad.weights;
  return mean.replicate(1, phi.cols());
}

AngularFlux apply_collision(const AngularFlux& phi, const ParameterPair& params,
                            const AngularQuadrature& quad) {
  if (phi.rows() != params.mu.size())
    throw std::invalid_argument("apply_collision: cell count mismatch");
  const AngularFlux aniso = phi - apply_theta(phi, quad);
  return params.mu.asDiagonal() * phi + params.sigma.asDiagonal() * aniso;
}

AngularFlux apply_transport(const AngularFlux& phi, const BoundaryData& inflow,
                            const SpatialGrid& grid, const AngularQuadrature& quad) {
  check_flux_shape(phi, grid, quad, "apply_transport");
  check_boundary_shape(inflow, grid, quad, "apply_transport");
  const Index m = grid.num_cells();
  const Index K = quad.size();
  AngularFlux out(m, K);
  for (Index k = 0; k < K; ++k) {
    const Scalar sx = quad.directions(k, 0);
    const Scalar sy = quad.directions(k, 1);
    const Scalar cx = std::abs(sx) / grid.h;
    const Scalar cy = std::abs(sy) / grid.h;
    const int side_x = sx > 0 ? kXMinus : kXPlus;
    const int side_y = sy > 0 ? kYMinus : kYPlus;
    for (Index c = 0; c < m; ++c) {
      Scalar v = 0;
      if (cx > 0) {
        const int nb = grid.neighbors(c, side_x);
        const Scalar up = nb >= 0 ? phi(nb, k) : inflow(grid.face_index(c, side_x), k);
        v += cx * (phi(c, k) - up);
      }
      if (cy > 0) {
        const int nb = grid.neighbors(c, side_y);
        const Scalar up = nb >= 0 ? phi(nb, k) : inflow(grid.face_index(c, side_y), k);
        v += cy * (phi(c, k) - up);
      }
      out(c, k) = v;
    }
  }
  return out;
}

AngularFlux inflow_source(const BoundaryData& inflow, const SpatialGrid& grid,
                          const AngularQuadrature& quad) {
  check_boundary_shape(inflow, grid, quad, "inflow_source");
  AngularFlux src = AngularFlux::Zero(grid.num_cells(), quad.size());
  for (Index f = 0; f < grid.num_faces(); ++f) {
    const BoundaryFace& face = grid.boundary_faces[static_cast<size_t>(f)];
    for (Index k = 0; k < quad.size(); ++k) {
      const Scalar sn = quad.directions.row(k).dot(face.normal);
      if (sn < 0) src(face.cell, k) += (-sn / grid.h) * inflow(f, k);
    }
  }
  return src;
}

BoundaryData outflow_trace(const AngularFlux& phi, const SpatialGrid& grid,
                           const AngularQuadrature& quad) {
  check_flux_shape(phi, grid, quad, "outflow_trace");
  BoundaryData trace = BoundaryData::Zero(grid.num_faces(), quad.size());
  for (Index f = 0; f < grid.num_faces(); ++f) {
    const BoundaryFace& face = grid.boundary_faces[static_cast<size_t>(f)];
    for (Index k = 0; k < quad.size(); ++k) {
      const Scalar sn = quad.directions.row(k).dot(face.normal);
      if (sn > 0) trace(f, k) = phi(face.cell, k);
    }
  }
  return trace;
}

Scalar flux_inner(const SpatialGrid& grid, const AngularQuadrature& quad, const AngularFlux& u,
                  const AngularFlux& v) {
  return grid.cell_area() * (u.cwiseProduct(v) * quad.weights).sum();
}

Scalar flux_norm(const SpatialGrid& grid, const AngularQuadrature& quad, const AngularFlux& phi) {
  return std::sqrt(std::max<Scalar>(flux_inner(grid, quad, phi, phi), 0));
}

namespace {

Scalar boundary_half_norm(const SpatialGrid& grid, const AngularQuadrature& quad,
                          const BoundaryData& g, int sign) {
  Scalar acc = 0;
  for (Index f = 0; f < grid.num_faces(); ++f) {
    const BoundaryFace& face = grid.boundary_faces[static_cast<size_t>(f)];
    for (Index k = 0; k < quad.size(); ++k) {
      const Scalar sn = quad.directions.row(k).dot(face.normal);
      if (sign * sn > 0)
        acc += face.length * quad.weights[k] * std::abs(sn) * g(f, k) * g(f, k);
    }
  }
  return std::sqrt(acc);
}

}  // namespace

Scalar inflow_norm(const SpatialGrid& grid, const AngularQuadrature& quad,
                   const BoundaryData& g) {
  check_boundary_shape(g, grid, quad, "inflow_norm");
  return boundary_half_norm(grid, quad, g, -1);
}

Scalar outflow_norm(const SpatialGrid& grid, const AngularQuadrature& quad,
                    const BoundaryData& g) {
  check_boundary_shape(g, grid, quad, "outflow_norm");
  return boundary_half_norm(grid, quad, g, +1);
}

StreamingOperator::StreamingOperator(const SpatialGrid& grid, const AngularQuadrature& quad,
                                     const ParameterPair& params)
    : grid_(&grid), quad_(&quad), params_(&params) {
  if (params.mu.size() != grid.num_cells() || params.sigma.size() != grid.num_cells())
    throw std::invalid_argument("StreamingOperator: parameter field size mismatch");
  removal_ = params.mu + params.sigma;

  // Traversal orders per sign pattern (bit 0: x descending, bit 1: y descending).
  order_.resize(4);
  for (int p = 0; p < 4; ++p) {
    auto& order = order_[p];
    order.reserve(static_cast<size_t>(grid.num_cells()));
    const bool x_desc = p & 1;
    const bool y_desc = p & 2;
    for (int jy = 0; jy < grid.n; ++jy) {
      const int iy = y_desc ? grid.n - 1 - jy : jy;
      for (int jx = 0; jx < grid.n; ++jx) {
        const int ix = x_desc ? grid.n - 1 - jx : jx;
        if (int c = grid.cell_index(ix, iy); c >= 0) order.push_back(c);
      }
    }
  }
  pattern_.resize(static_cast<size_t>(quad.size()));
  for (Index k = 0; k < quad.size(); ++k)
    pattern_[static_cast<size_t>(k)] =
        (quad.directions(k, 0) < 0 ? 1 : 0) | (quad.directions(k, 1) < 0 ? 2 : 0);
}

void StreamingOperator::sweep(int k, const Eigen::Ref<const Vector>& rhs, Eigen::Ref<Vector> x,
                              bool transposed) const {
  const Scalar sx = quad_->directions(k, 0);
  const Scalar sy = quad_->directions(k, 1);
  const Scalar cx = std::abs(sx) / grid_->h;
  const Scalar cy = std::abs(sy) / grid_->h;
  // Upwind sides for the forward sweep; the transposed system couples each
  // cell to its downwind neighbors instead and is swept in reverse order.
  int side_x = sx > 0 ? kXMinus : kXPlus;
  int side_y = sy > 0 ? kYMinus : kYPlus;
  if (transposed) {
    side_x = side_x == kXMinus ? kXPlus : kXMinus;
    side_y = side_y == kYMinus ? kYPlus : kYMinus;
  }
  const auto& order = order_[static_cast<size_t>(pattern_[static_cast<size_t>(k)])];
  const Index m = static_cast<Index>(order.size());
  for (Index i = 0; i < m; ++i) {
    const int c = transposed ? order[static_cast<size_t>(m - 1 - i)]
                             : order[static_cast<size_t>(i)];
    Scalar num = rhs[c];
    if (cx > 0) {
      if (const int nb = grid_->neighbors(c, side_x); nb >= 0) num += cx * x[nb];
    }
    if (cy > 0) {
      if (const int nb = grid_->neighbors(c, side_y); nb >= 0) num += cy * x[nb];
    }
    x[c] = num / (cx + cy + removal_[c]);
  }
}

Matrix StreamingOperator::solve(const Matrix& rhs) const {
  if (rhs.rows() != grid_->num_cells() || rhs.cols() != quad_->size())
    throw std::invalid_argument("StreamingOperator::solve: shape mismatch");
  Matrix x(rhs.rows(), rhs.cols());
  for (Index k = 0; k < quad_->size(); ++k)
    sweep(static_cast<int>(k), rhs.col(k), x.col(k), false);
  return x;
}

Matrix StreamingOperator::solve_transposed(const Matrix& rhs) const {
  if (rhs.rows() != grid_->num_cells() || rhs.cols() != quad_->size())
    throw std::invalid_argument("StreamingOperator::solve_transposed: shape mismatch");
  Matrix x(rhs.rows(), rhs.cols());
  for (Index k = 0; k < quad_->size(); ++k)
    sweep(static_cast<int>(k), rhs.col(k), x.col(k), true);
  return x;
}

Vector StreamingOperator::solve_isotropic(const Vector& rhs) const {
  Vector acc = Vector::Zero(rhs.size());
  Vector x(rhs.size());
  for (Index k = 0; k < quad_->size(); ++k) {
    sweep(static_cast<int>(k), rhs, x, false);
    acc += quad_->weights[k] * x;
  }
  return acc;
}

Vector StreamingOperator::solve_isotropic_transposed(const Vector& rhs) const {
  Vector acc = Vector::Zero(rhs.size());
  Vector x(rhs.size());
  for (Index k = 0; k < quad_->size(); ++k) {
    sweep(static_cast<int>(k), rhs, x, true);
    acc += quad_->weights[k] * x;
  }
  return acc;
}

AngularFlux solve_forward(const ParameterPair& params, const AngularFlux& f,
                          const BoundaryData& g, const SpatialGrid& grid,
                          const AngularQuadrature& quad, const SolveOptions& opts,
                          SolveReport* report) {
  require_in_domain(params, "solve_forward");
  check_flux_shape(f, grid, quad, "solve_forward");
  check_boundary_shape(g, grid, quad, "solve_forward");

  SolveReport local;
  const Scalar data_scale = flux_norm(grid, quad, f) + inflow_norm(grid, quad, g);
  if (data_scale == 0) {
    if (report) *report = local;
    return AngularFlux::Zero(grid.num_cells(), quad.size());
  }

  const StreamingOperator streaming(grid, quad, params);
  const Matrix rhs = f + inflow_source(g, grid, quad);
  const Matrix swept = streaming.solve(rhs);

  if (params.sigma.maxCoeff() == 0) {
    // No scattering coupling: the sweeps already solved the full system.
    if (report) *report = local;
    return swept;
  }

  // Eliminate the per-direction unknowns: with the scattering source
  // chi = sigma * (direction average of phi), the solution is
  //   phi_k = L_k^{-1}(rhs_k + chi)
  // and chi satisfies the fixed-point equation chi = sigma*(r + S chi) with
  // r the direction average of the swept rhs and S the isotropic sweep.
  // The fixed-point residual equals the full transport residual up to the
  // cell-area factor, which gives the stopping rule below.
  const Vector r = swept * quad.weights;
  const Vector b_chi = params.sigma.cwiseProduct(r);
  const Scalar tol_abs = Scalar(0.5) * opts.rtol * data_scale / grid.h;

  Vector chi = Vector::Zero(grid.num_cells());
  Scalar increment = std::numeric_limits<Scalar>::infinity();
  for (int it = 0; it < opts.plain_iterations && local.iterations < opts.max_iter; ++it) {
    ++local.iterations;
    Vector next = params.sigma.cwiseProduct(r + streaming.solve_isotropic(chi));
    increment = (next - chi).norm();
    chi.swap(next);
    if (increment <= tol_abs) break;
  }

  const auto moment_op = [&](const Vector& v) -> Vector {
    return v - params.sigma.cwiseProduct(streaming.solve_isotropic(v));
  };
  const KrylovResult kr =
      gmres(moment_op, b_chi, chi, tol_abs, opts.max_iter - local.iterations);
  local.iterations += kr.iterations;
  local.accelerated = kr.iterations > 0;
  local.residual = grid.h * kr.residual / data_scale;
  if (!kr.converged)
    throw SolverError("solve_forward: no convergence within max_iter (relative residual " +
                          std::to_string(local.residual) + ")",
                      local.residual);

  if (report) *report = local;
  return swept + streaming.solve(chi.replicate(1, quad.size()));
}

TransportFactorization::TransportFactorization(std::shared_ptr<const SpatialGrid> grid,
                                               std::shared_ptr<const AngularQuadrature> quad,
                                               std::shared_ptr<const ParameterPair> params)
    : grid_(std::move(grid)),
      quad_(std::move(quad)),
      params_(std::move(params)),
      streaming_(*grid_, *quad_, *params_) {
  require_in_domain(*params_, "TransportFactorization");
  const Index m = grid_->num_cells();
  Matrix moment = Matrix::Identity(m, m);
  Vector e = Vector::Zero(m);
  for (Index j = 0; j < m; ++j) {
    e[j] = 1;
    moment.col(j) -= params_->sigma.cwiseProduct(streaming_.solve_isotropic(e));
    e[j] = 0;
  }
  moment_lu_.compute(moment);
}

AngularFlux TransportFactorization::solve(const AngularFlux& rhs) const {
  check_flux_shape(rhs, *grid_, *quad_, "TransportFactorization::solve");
  const Matrix swept = streaming_.solve(rhs);
  const Vector r = swept * quad_->weights;
  const Vector chi = moment_lu_.solve(params_->sigma.cwiseProduct(r));
  return swept + streaming_.solve(chi.replicate(1, quad_->size()));
}

AngularFlux TransportFactorization::solve_adjoint(const AngularFlux& rhs) const {
  check_flux_shape(rhs, *grid_, *quad_, "TransportFactorization::solve_adjoint");
  const Matrix swept = streaming_.solve_transposed(rhs);
  const Vector r = swept * quad_->weights;
  // The adjoint scattering unknown is the weighted direction average itself;
  // its system matrix is exactly the transpose of the forward moment matrix.
  const Vector psi = moment_lu_.transpose().solve(r);
  const Vector src = params_->sigma.cwiseProduct(psi);
  return swept + streaming_.solve_transposed(src.replicate(1, quad_->size()));
}

}  // namespace radtomo
