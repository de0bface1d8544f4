#include "radtomo/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "radtomo/errors.hpp"

namespace radtomo {

namespace {

std::string format_full(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Scalar parse_value(const std::string& token, const std::string& path, int line) {
  try {
    size_t pos = 0;
    const Scalar v = std::stod(token, &pos);
    while (pos < token.size() && std::isspace(static_cast<unsigned char>(token[pos]))) ++pos;
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(line) + ": bad numeric value '" + token + "'");
  }
}

}  // namespace

void write_matrix_csv(const std::string& path, const Matrix& values,
                      const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& c : comments) out << "# " << c << "\n";
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out << ",";
      out << format_full(values(i, j));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

Matrix read_matrix_csv(const std::string& path, std::vector<std::string>* comments) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<std::vector<Scalar>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string c = line.substr(1);
      if (!c.empty() && c[0] == ' ') c.erase(0, 1);
      if (comments) comments->push_back(c);
      continue;
    }
    std::vector<Scalar> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) row.push_back(parse_value(token, path, lineno));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ":" + std::to_string(lineno) + ": ragged row (expected " +
                    std::to_string(rows.front().size()) + " columns, got " +
                    std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": no data rows");
  Matrix values(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < values.rows(); ++i)
    for (Index j = 0; j < values.cols(); ++j)
      values(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return values;
}

void write_field_csv(const std::string& path, const SpatialGrid& grid, const Vector& field) {
  write_matrix_csv(path, field_to_grid(grid, field));
}

Vector read_field_csv(const std::string& path, const SpatialGrid& grid) {
  return field_from_grid(grid, read_matrix_csv(path));
}

void write_quadrature_csv(const std::string& path, const AngularQuadrature& quad) {
  Matrix table(quad.size(), 2);
  table.col(0) = quad.angles;
  table.col(1) = quad.weights;
  write_matrix_csv(path, table, {"angle,weight"});
}

}  // namespace radtomo
