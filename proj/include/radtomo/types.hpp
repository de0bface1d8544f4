#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace radtomo {

using Scalar = double;
using Index = Eigen::Index;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using SparseMatrix = Eigen::SparseMatrix<Scalar>;

/// Angular flux sampled per (cell, direction). Rows follow the grid's
/// compact cell numbering, columns the quadrature directions.
using AngularFlux = Matrix;

/// Boundary values per (boundary face, direction). Depending on use the
/// meaningful entries are the inflow half (s·n < 0) or the outflow half
/// (s·n > 0); the other half is kept at zero.
using BoundaryData = Matrix;

}  // namespace radtomo
