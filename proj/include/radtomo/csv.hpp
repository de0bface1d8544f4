#pragma once

#include <string>
#include <vector>

#include "radtomo/grid.hpp"
#include "radtomo/quadrature.hpp"
#include "radtomo/types.hpp"

namespace radtomo {

/// Writes a matrix as comma-separated rows at full decimal precision
/// (values round-trip bitwise). Lines in `comments` are emitted first,
/// each prefixed with "# ".
void write_matrix_csv(const std::string& path, const Matrix& values,
                      const std::vector<std::string>& comments = {});

/// Reads a matrix written by write_matrix_csv. Leading "#" lines are
/// returned through `comments` when given. Ragged rows are an error.
Matrix read_matrix_csv(const std::string& path, std::vector<std::string>* comments = nullptr);

/// Per-cell field as an n x n grid matrix CSV (one row per grid row).
void write_field_csv(const std::string& path, const SpatialGrid& grid, const Vector& field);
Vector read_field_csv(const std::string& path, const SpatialGrid& grid);

/// Direction table as angle,weight rows.
void write_quadrature_csv(const std::string& path, const AngularQuadrature& quad);

}  // namespace radtomo
