#include "radtomo/grid.hpp"

#include <stdexcept>

namespace radtomo {

namespace {

// Offsets to the neighbor cell per side, and the outward normal of that side.
constexpr int kDx[4] = {-1, 1, 0, 0};
constexpr int kDy[4] = {0, 0, -1, 1};

Vec2 side_normal(int side) {
  switch (side) {
    case kXMinus: return Vec2(-1, 0);
    case kXPlus: return Vec2(1, 0);
    case kYMinus: return Vec2(0, -1);
    default: return Vec2(0, 1);
  }
}

}  // namespace

SpatialGrid build_grid(int n, Scalar radius) {
  if (n < 4) throw std::invalid_argument("build_grid: need at least 4 cells per axis");
  if (!(radius > 0)) throw std::invalid_argument("build_grid: radius must be positive");

  SpatialGrid grid;
  grid.n = n;
  grid.radius = radius;
  grid.h = 2 * radius / n;

  const auto center_of = [&](int ix, int iy) {
    return Vec2(-radius + (ix + Scalar(0.5)) * grid.h,
                -radius + (iy + Scalar(0.5)) * grid.h);
  };

  grid.cell_index = Eigen::ArrayXXi::Constant(n, n, -1);
  int m = 0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      if (center_of(ix, iy).norm() < radius) grid.cell_index(ix, iy) = m++;
  if (m == 0) throw std::invalid_argument("build_grid: mask is empty");

  grid.centers.resize(m, 2);
  grid.neighbors = Eigen::ArrayXXi::Constant(m, 4, -1);
  grid.face_index = Eigen::ArrayXXi::Constant(m, 4, -1);

  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const int c = grid.cell_index(ix, iy);
      if (c < 0) continue;
      const Vec2 rc = center_of(ix, iy);
      grid.centers.row(c) = rc.transpose();
      for (int side = 0; side < 4; ++side) {
        const int jx = ix + kDx[side];
        const int jy = iy + kDy[side];
        const bool inside = jx >= 0 && jx < n && jy >= 0 && jy < n;
        const int nb = inside ? grid.cell_index(jx, jy) : -1;
        if (nb >= 0) {
          grid.neighbors(c, side) = nb;
        } else {
          // Exposed edge: one boundary face per (cell, side).
          BoundaryFace face;
          face.cell = c;
          face.side = side;
          face.normal = side_normal(side);
          face.center = rc + (grid.h / 2) * face.normal;
          face.length = grid.h;
          grid.face_index(c, side) = static_cast<int>(grid.boundary_faces.size());
          grid.boundary_faces.push_back(face);
        }
      }
    }
  }
  return grid;
}

Matrix field_to_grid(const SpatialGrid& grid, const Vector& field) {
  if (field.size() != grid.num_cells())
    throw std::invalid_argument("field_to_grid: size mismatch");
  Matrix out = Matrix::Zero(grid.n, grid.n);
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix)
      if (int c = grid.cell_index(ix, iy); c >= 0) out(iy, ix) = field[c];
  return out;
}

Vector field_from_grid(const SpatialGrid& grid, const Matrix& values) {
  if (values.rows() != grid.n || values.cols() != grid.n)
    throw std::invalid_argument("field_from_grid: shape mismatch");
  Vector out(grid.num_cells());
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix)
      if (int c = grid.cell_index(ix, iy); c >= 0) out[c] = values(iy, ix);
  return out;
}

}  // namespace radtomo
