#pragma once

#include <vector>

#include "radtomo/types.hpp"

namespace radtomo {

/// Cell-edge sides in the order used throughout: -x, +x, -y, +y.
enum Side : int { kXMinus = 0, kXPlus = 1, kYMinus = 2, kYPlus = 3 };

struct BoundaryFace {
  int cell;       ///< compact index of the interior cell owning the face
  int side;       ///< which side of the cell the face sits on
  Vec2 normal;    ///< outward unit normal
  Vec2 center;    ///< face midpoint
  Scalar length;  ///< face length (equals the cell width)
};

/// Cartesian cell grid over [-radius, radius]^2 masked to the disk of the
/// same radius. Cells whose centers fall strictly inside the disk are kept;
/// the exposed cell edges form the staircase boundary.
struct SpatialGrid {
  int n = 0;          ///< cells per axis of the bounding box
  Scalar h = 0;       ///< cell width, mm
  Scalar radius = 0;  ///< disk radius, mm

  Eigen::ArrayXXi cell_index;  ///< n x n, compact cell id or -1 outside the mask
  Matrix centers;              ///< m x 2 cell centers
  Eigen::ArrayXXi neighbors;   ///< m x 4, interior neighbor id per side or -1
  Eigen::ArrayXXi face_index;  ///< m x 4, boundary face id per side or -1
  std::vector<BoundaryFace> boundary_faces;

  Index num_cells() const { return centers.rows(); }
  Index num_faces() const { return static_cast<Index>(boundary_faces.size()); }
  Scalar cell_area() const { return h * h; }
  Scalar masked_area() const { return cell_area() * static_cast<Scalar>(num_cells()); }
  Vec2 cell_center(Index c) const { return centers.row(c).transpose(); }
};

/// Builds the masked disk grid. Rejects n < 4 and non-positive radii.
SpatialGrid build_grid(int n, Scalar radius);

/// Scatters a compact per-cell vector onto the full n x n grid
/// (masked-out cells read 0). Row index is the y cell index.
Matrix field_to_grid(const SpatialGrid& grid, const Vector& field);

/// Gathers the masked cells of a full n x n grid matrix.
Vector field_from_grid(const SpatialGrid& grid, const Matrix& values);

}  // namespace radtomo
