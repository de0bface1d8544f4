#include <doctest.h>

#include <cmath>

#include "radtomo/errors.hpp"
#include "radtomo/transport.hpp"
#include "test_support.hpp"

using namespace radtomo;

namespace {

struct Setup {
  SpatialGrid grid;
  AngularQuadrature quad;
};

Setup small_setup(int n = 6, int n_dir = 8, Scalar radius = 1.0) {
  return {build_grid(n, radius), build_quadrature(n_dir)};
}

// Ray-cast solution of pure absorption: phi = exp(-mu * tau) with tau the
// distance to a reference circle of radius 2R along -s. Smooth on the whole
// bounding box, and satisfies s.grad(phi) + mu*phi = 0 exactly.
Scalar ray_tau(const Vec2& r, const Vec2& s, Scalar r_ref) {
  const Scalar rs = r.dot(s);
  return rs + std::sqrt(rs * rs + r_ref * r_ref - r.squaredNorm());
}

AngularFlux ray_flux(const SpatialGrid& grid, const AngularQuadrature& quad, Scalar mu) {
  const Scalar r_ref = 2 * grid.radius;
  AngularFlux phi(grid.num_cells(), quad.size());
  for (Index c = 0; c < grid.num_cells(); ++c)
    for (Index k = 0; k < quad.size(); ++k)
      phi(c, k) = std::exp(-mu * ray_tau(grid.cell_center(c), quad.directions.row(k), r_ref));
  return phi;
}

BoundaryData ray_inflow(const SpatialGrid& grid, const AngularQuadrature& quad, Scalar mu) {
  const Scalar r_ref = 2 * grid.radius;
  BoundaryData g = BoundaryData::Zero(grid.num_faces(), quad.size());
  for (Index f = 0; f < grid.num_faces(); ++f) {
    const BoundaryFace& face = grid.boundary_faces[static_cast<size_t>(f)];
    for (Index k = 0; k < quad.size(); ++k)
      if (quad.directions.row(k).dot(face.normal) < 0)
        g(f, k) = std::exp(-mu * ray_tau(face.center, quad.directions.row(k), r_ref));
  }
  return g;
}

// Dense assembly of the full (cells*directions)^2 system, test-side oracle.
struct DenseSystem {
  Matrix streaming;  // block diagonal over directions, removal included
  Matrix scattering; // -sigma_c w_k' coupling
  Matrix full() const { return streaming + scattering; }
};

DenseSystem assemble_dense(const SpatialGrid& grid, const AngularQuadrature& quad,
                           const ParameterPair& params) {
  const Index m = grid.num_cells();
  const Index K = quad.size();
  DenseSystem sys;
  sys.streaming = Matrix::Zero(m * K, m * K);
  sys.scattering = Matrix::Zero(m * K, m * K);
  for (Index k = 0; k < K; ++k) {
    const Scalar sx = quad.directions(k, 0);
    const Scalar sy = quad.directions(k, 1);
    const Scalar cx = std::abs(sx) / grid.h;
    const Scalar cy = std::abs(sy) / grid.h;
    const int side_x = sx > 0 ? kXMinus : kXPlus;
    const int side_y = sy > 0 ? kYMinus : kYPlus;
    for (Index c = 0; c < m; ++c) {
      const Index row = c + m * k;
      sys.streaming(row, row) = cx + cy + params.mu[c] + params.sigma[c];
      if (cx > 0)
        if (int nb = grid.neighbors(c, side_x); nb >= 0) sys.streaming(row, nb + m * k) -= cx;
      if (cy > 0)
        if (int nb = grid.neighbors(c, side_y); nb >= 0) sys.streaming(row, nb + m * k) -= cy;
      for (Index kp = 0; kp < K; ++kp)
        sys.scattering(row, c + m * kp) -= params.sigma[c] * quad.weights[kp];
    }
  }
  return sys;
}

Vector flatten(const AngularFlux& phi) {
  return Eigen::Map<const Vector>(phi.data(), phi.size());
}

AngularFlux unflatten(const Vector& v, Index m, Index K) {
  return Eigen::Map<const AngularFlux>(v.data(), m, K);
}

}  // namespace

TEST_CASE("theta: constants, odd moments, hand summation, projection") {
  auto [grid, quad] = small_setup();
  const Index m = grid.num_cells();
  const Index K = quad.size();

  const AngularFlux ones = AngularFlux::Constant(m, K, 3.25);
  CHECK((apply_theta(ones, quad) - ones).cwiseAbs().maxCoeff() == 0);

  AngularFlux odd(m, K);
  for (Index k = 0; k < K; ++k) odd.col(k).setConstant(quad.directions(k, 0));
  CHECK(apply_theta(odd, quad).cwiseAbs().maxCoeff() < 1e-15);

  std::mt19937_64 rng(21);
  const AngularFlux phi = testing::random_matrix(rng, m, K);
  const AngularFlux avg = apply_theta(phi, quad);
  for (Index c : {Index(0), m / 2, m - 1}) {
    Scalar expect = 0;
    for (Index k = 0; k < K; ++k) expect += quad.weights[k] * phi(c, k);
    for (Index k = 0; k < K; ++k) CHECK(avg(c, k) == doctest::Approx(expect).epsilon(1e-15));
  }

  // theta is a projection, exactly
  CHECK((apply_theta(avg, quad) - avg).cwiseAbs().maxCoeff() == 0);

  CHECK_THROWS_AS(apply_theta(AngularFlux::Zero(m, K + 1), quad), std::invalid_argument);
}

TEST_CASE("collision: zero, isotropic fixed point, independent recomputation") {
  auto [grid, quad] = small_setup();
  const Index m = grid.num_cells();
  const Index K = quad.size();
  std::mt19937_64 rng(22);

  const AngularFlux phi = testing::random_matrix(rng, m, K);
  ParameterPair zero = constant_parameters(grid, 0, 0, 0, 0);
  CHECK(apply_collision(phi, zero, quad).cwiseAbs().maxCoeff() == 0);

  ParameterPair p = testing::random_parameters(rng, grid, 0.5, 2.0);
  const Vector iso_values = testing::random_vector(rng, m);
  const AngularFlux iso = iso_values.replicate(1, K);
  const AngularFlux c_iso = apply_collision(iso, p, quad);
  CHECK((c_iso - p.mu.asDiagonal() * iso).cwiseAbs().maxCoeff() < 1e-14);

  // straightforward per-entry recomputation
  const AngularFlux fast = apply_collision(phi, p, quad);
  for (Index c = 0; c < m; ++c) {
    Scalar mean = 0;
    for (Index k = 0; k < K; ++k) mean += quad.weights[k] * phi(c, k);
    for (Index k = 0; k < K; ++k) {
      const Scalar expect = p.mu[c] * phi(c, k) + p.sigma[c] * (phi(c, k) - mean);
      CHECK(fast(c, k) == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("collision is positive in the weighted inner product") {
  auto [grid, quad] = small_setup();
  std::mt19937_64 rng(23);
  ParameterPair p = testing::random_parameters(rng, grid, 1.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const AngularFlux phi = testing::random_matrix(rng, grid.num_cells(), quad.size());
    CHECK(flux_inner(grid, quad, apply_collision(phi, p, quad), phi) >= -1e-12);
  }
}

TEST_CASE("transport: constants are invariant") {
  auto [grid, quad] = small_setup();
  const AngularFlux phi = AngularFlux::Constant(grid.num_cells(), quad.size(), 2.5);
  const BoundaryData g = BoundaryData::Constant(grid.num_faces(), quad.size(), 2.5);
  CHECK(apply_transport(phi, g, grid, quad).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("transport: directional derivative of a linear profile") {
  auto [grid, quad] = small_setup(12, 8, 1.0);
  const Index m = grid.num_cells();
  const Index K = quad.size();
  AngularFlux phi(m, K);
  BoundaryData g(grid.num_faces(), K);
  for (Index k = 0; k < K; ++k) {
    const Vec2 s = quad.directions.row(k);
    for (Index c = 0; c < m; ++c) phi(c, k) = grid.cell_center(c).dot(s);
    for (Index f = 0; f < grid.num_faces(); ++f) {
      // ghost-cell sample: one cell width upwind of the owning center
      const auto& face = grid.boundary_faces[static_cast<size_t>(f)];
      const Vec2 ghost = grid.cell_center(face.cell) + grid.h * face.normal;
      g(f, k) = ghost.dot(s);
    }
  }
  const AngularFlux adv = apply_transport(phi, g, grid, quad);
  // upwind differences are exact on linear profiles
  CHECK((adv.array() - 1).abs().maxCoeff() < 1e-12);

  // with boundary data sampled at the face centers instead, the deviation is
  // confined to boundary cells and bounded
  BoundaryData g_face(grid.num_faces(), K);
  for (Index k2 = 0; k2 < K; ++k2) {
    const Vec2 s = quad.directions.row(k2);
    for (Index f = 0; f < grid.num_faces(); ++f)
      g_face(f, k2) = grid.boundary_faces[static_cast<size_t>(f)].center.dot(s);
  }
  const AngularFlux adv2 = apply_transport(phi, g_face, grid, quad);
  for (Index c = 0; c < m; ++c)
    for (Index k = 0; k < K; ++k) {
      const bool interior = grid.face_index(c, kXMinus) < 0 && grid.face_index(c, kXPlus) < 0 &&
                            grid.face_index(c, kYMinus) < 0 && grid.face_index(c, kYPlus) < 0;
      if (interior) CHECK(adv2(c, k) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(adv2(c, k) - 1.0) < 0.51);  // at most half a component squared per axis
    }
}

TEST_CASE("transport: hand-evaluated stencil at one cell") {
  auto [grid, quad] = small_setup();
  std::mt19937_64 rng(31);
  const AngularFlux phi = testing::random_matrix(rng, grid.num_cells(), quad.size());
  const BoundaryData g = testing::random_matrix(rng, grid.num_faces(), quad.size());
  const AngularFlux adv = apply_transport(phi, g, grid, quad);

  const int k = 0;  // first direction has positive components
  const Scalar sx = quad.directions(k, 0);
  const Scalar sy = quad.directions(k, 1);
  REQUIRE(sx > 0);
  REQUIRE(sy > 0);

  // interior cell: upwind neighbors west and south
  int c_int = -1;
  for (Index c = 0; c < grid.num_cells(); ++c)
    if (grid.neighbors(c, kXMinus) >= 0 && grid.neighbors(c, kYMinus) >= 0) c_int = static_cast<int>(c);
  REQUIRE(c_int >= 0);
  const Scalar expect_int = (sx * (phi(c_int, k) - phi(grid.neighbors(c_int, kXMinus), k)) +
                             sy * (phi(c_int, k) - phi(grid.neighbors(c_int, kYMinus), k))) /
                            grid.h;
  CHECK(adv(c_int, k) == doctest::Approx(expect_int).epsilon(1e-13));

  // boundary cell: west face exposed, value comes from g
  int c_bnd = -1;
  for (Index c = 0; c < grid.num_cells(); ++c)
    if (grid.face_index(c, kXMinus) >= 0 && grid.neighbors(c, kYMinus) >= 0) c_bnd = static_cast<int>(c);
  REQUIRE(c_bnd >= 0);
  const Scalar expect_bnd = (sx * (phi(c_bnd, k) - g(grid.face_index(c_bnd, kXMinus), k)) +
                             sy * (phi(c_bnd, k) - phi(grid.neighbors(c_bnd, kYMinus), k))) /
                            grid.h;
  CHECK(adv(c_bnd, k) == doctest::Approx(expect_bnd).epsilon(1e-13));
}

TEST_CASE("solve_forward: unit inflow without interaction gives flux one") {
  auto [grid, quad] = small_setup(10, 8, 25.0);
  const ParameterPair p = constant_parameters(grid, 0, 0, 0, 0);
  const AngularFlux f = AngularFlux::Zero(grid.num_cells(), quad.size());
  const BoundaryData g = BoundaryData::Ones(grid.num_faces(), quad.size());
  SolveReport report;
  const AngularFlux phi = solve_forward(p, f, g, grid, quad, {}, &report);
  CHECK((phi.array() - 1).abs().maxCoeff() < 1e-13);
  CHECK_FALSE(report.accelerated);
}

TEST_CASE("solve_forward: constant preservation with scattering") {
  auto [grid, quad] = small_setup(10, 8, 5.0);
  const ParameterPair p = constant_parameters(grid, 0, 2.0, 0, 2.0);
  const AngularFlux f = AngularFlux::Zero(grid.num_cells(), quad.size());
  const BoundaryData g = BoundaryData::Constant(grid.num_faces(), quad.size(), 4.0);
  const AngularFlux phi = solve_forward(p, f, g, grid, quad);
  CHECK((phi.array() - 4).abs().maxCoeff() < 1e-8);
}

TEST_CASE("solve_forward: pure absorption matches the ray oracle") {
  const Scalar mu = 0.04;
  auto [grid, quad] = small_setup(32, 8, 25.0);
  const ParameterPair p = constant_parameters(grid, mu, 0, mu, 0);
  const AngularFlux f = AngularFlux::Zero(grid.num_cells(), quad.size());
  const AngularFlux phi = solve_forward(p, f, ray_inflow(grid, quad, mu), grid, quad);
  const AngularFlux exact = ray_flux(grid, quad, mu);
  const Scalar err = (phi - exact).cwiseAbs().maxCoeff();
  CHECK(err < 1.0 * grid.h * mu);  // first-order accurate

  // outflow trace of the same run stays within the same band
  const BoundaryData trace = outflow_trace(phi, grid, quad);
  Scalar trace_err = 0;
  for (Index fidx = 0; fidx < grid.num_faces(); ++fidx) {
    const auto& face = grid.boundary_faces[static_cast<size_t>(fidx)];
    for (Index k = 0; k < quad.size(); ++k)
      if (quad.directions.row(k).dot(face.normal) > 0) {
        const Scalar expect = std::exp(
            -mu * ray_tau(grid.cell_center(face.cell), quad.directions.row(k), 2 * grid.radius));
        trace_err = std::max(trace_err, std::abs(trace(fidx, k) - expect));
      }
  }
  CHECK(trace_err < 1.0 * grid.h * mu);
}

TEST_CASE("solve_forward: agreement with the dense direct solve") {
  auto [grid, quad] = small_setup(8, 8, 1.0);
  const Index m = grid.num_cells();
  const Index K = quad.size();
  const ParameterPair p = constant_parameters(grid, 0.1, 1.0, 0.1, 1.0);
  std::mt19937_64 rng(37);
  const AngularFlux f = testing::random_matrix(rng, m, K, 0, 1);
  const BoundaryData g = testing::random_matrix(rng, grid.num_faces(), K, 0, 1).cwiseProduct(
      (BoundaryData::Ones(grid.num_faces(), K)));

  const Vector rhs = flatten(f + inflow_source(g, grid, quad));
  const Matrix full = assemble_dense(grid, quad, p).full();
  const AngularFlux dense = unflatten(full.partialPivLu().solve(rhs), m, K);

  SolveReport report;
  const AngularFlux iterative = solve_forward(p, f, g, grid, quad, {}, &report);
  CHECK((iterative - dense).norm() / dense.norm() < 1e-8);
  CHECK(report.accelerated);  // sigma*diam is large enough to trip the switch

  // the factorized path reproduces the same solution
  const TransportFactorization fact(std::make_shared<SpatialGrid>(grid),
                                    std::make_shared<AngularQuadrature>(quad),
                                    std::make_shared<ParameterPair>(p));
  const AngularFlux direct = fact.solve(f + inflow_source(g, grid, quad));
  CHECK((direct - dense).norm() / dense.norm() < 1e-10);
}

TEST_CASE("factorized adjoint solve matches the dense transpose") {
  auto [grid, quad] = small_setup(6, 4, 1.0);
  const Index m = grid.num_cells();
  const Index K = quad.size();
  std::mt19937_64 rng(41);
  const ParameterPair p = testing::random_parameters(rng, grid, 0.5, 1.5);

  const DenseSystem sys = assemble_dense(grid, quad, p);
  // adjoint in the weighted inner product: transpose the streaming blocks,
  // keep the collision part (self-adjoint under equal weights)
  const Matrix adj = sys.streaming.transpose() + sys.scattering;

  const AngularFlux y = testing::random_matrix(rng, m, K);
  const TransportFactorization fact(std::make_shared<SpatialGrid>(grid),
                                    std::make_shared<AngularQuadrature>(quad),
                                    std::make_shared<ParameterPair>(p));
  const AngularFlux lambda = fact.solve_adjoint(y);
  const AngularFlux dense = unflatten(adj.partialPivLu().solve(flatten(y)), m, K);
  CHECK((lambda - dense).norm() / dense.norm() < 1e-10);

  // and the two solve paths satisfy the inner-product identity
  const AngularFlux u = testing::random_matrix(rng, m, K);
  const AngularFlux su = fact.solve(u);
  const Scalar lhs = flux_inner(grid, quad, su, y);
  const Scalar rhs2 = flux_inner(grid, quad, u, lambda);
  CHECK(lhs == doctest::Approx(rhs2).epsilon(1e-11));
}

TEST_CASE("solve_forward: maximum principle and positivity") {
  auto [grid, quad] = small_setup(12, 8, 5.0);
  std::mt19937_64 rng(43);
  const Index m = grid.num_cells();
  const Index K = quad.size();

  // boundary-driven: max |phi| <= max |g|
  const ParameterPair p = testing::random_parameters(rng, grid, 0.5, 3.0);
  const AngularFlux zero_f = AngularFlux::Zero(m, K);
  BoundaryData g = testing::random_matrix(rng, grid.num_faces(), K, -2, 2);
  const AngularFlux phi = solve_forward(p, zero_f, g, grid, quad);
  CHECK(phi.cwiseAbs().maxCoeff() <= g.cwiseAbs().maxCoeff() + 1e-9);

  // interior-driven, weak interaction: max |phi| <= diam * max |f|
  const ParameterPair weak = constant_parameters(grid, 0.01, 0.02, 0.01, 0.02);
  const AngularFlux f = testing::random_matrix(rng, m, K, 0, 1);
  const BoundaryData zero_g = BoundaryData::Zero(grid.num_faces(), K);
  const AngularFlux phi_f = solve_forward(weak, f, zero_g, grid, quad);
  CHECK(phi_f.maxCoeff() <= 2 * grid.radius * f.maxCoeff() + 1e-9);

  // positivity for non-negative data
  CHECK(phi_f.minCoeff() >= -1e-10);
  g = g.cwiseAbs();
  const AngularFlux phi_pos = solve_forward(p, f, g, grid, quad);
  CHECK(phi_pos.minCoeff() >= -1e-10);
}

TEST_CASE("solve_forward: iteration budget produces a reported failure") {
  auto [grid, quad] = small_setup(10, 8, 25.0);
  const ParameterPair p = constant_parameters(grid, 0.01, 20.0, 0.01, 20.0);
  const AngularFlux f = AngularFlux::Zero(grid.num_cells(), quad.size());
  const BoundaryData g = BoundaryData::Ones(grid.num_faces(), quad.size());
  SolveOptions opts;
  opts.max_iter = 3;
  try {
    solve_forward(p, f, g, grid, quad, opts);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.achieved_residual() > 0);
  }
}

TEST_CASE("outflow trace of constants") {
  auto [grid, quad] = small_setup();
  const AngularFlux ones = AngularFlux::Ones(grid.num_cells(), quad.size());
  const BoundaryData trace = outflow_trace(ones, grid, quad);
  for (Index f = 0; f < grid.num_faces(); ++f) {
    const auto& face = grid.boundary_faces[static_cast<size_t>(f)];
    for (Index k = 0; k < quad.size(); ++k) {
      const Scalar sn = quad.directions.row(k).dot(face.normal);
      CHECK(trace(f, k) == (sn > 0 ? 1.0 : 0.0));
    }
  }
  CHECK(outflow_trace(ones * 0, grid, quad).cwiseAbs().maxCoeff() == 0);
}
