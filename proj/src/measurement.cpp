#include "radtomo/measurement.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "radtomo/csv.hpp"
#include "radtomo/errors.hpp"

namespace radtomo {

namespace {

constexpr Scalar kTwoPi = 2 * std::numbers::pi_v<Scalar>;

// Absolute circular distance between two angles, in [0, pi].
Scalar circular_distance(Scalar a, Scalar b) {
  Scalar d = std::fmod(a - b, kTwoPi);
  if (d < 0) d += kTwoPi;
  return std::min(d, kTwoPi - d);
}

bool arc_contains(Scalar center, Scalar width, const Vec2& point) {
  const Scalar angle = std::atan2(point.y(), point.x());
  return circular_distance(angle, center) <= width / 2 + Scalar(1e-12);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string format_full(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Matrix measurement_columns(const SourceSet& sources, const DetectorSet& detectors,
                           const SpatialGrid& grid, const AngularQuadrature& quad,
                           const std::function<AngularFlux(const BoundaryData&, Index)>& solve) {
  Matrix entries(detectors.size(), sources.size());
  for (Index i = 0; i < detectors.size(); ++i) {
    if (detector_faces(detectors.arcs[static_cast<size_t>(i)], grid).empty())
      std::cerr << "warning: detector " << i << " captures no boundary face\n";
  }
  for (Index j = 0; j < sources.size(); ++j) {
    const BoundaryData g = source_inflow(sources.arcs[static_cast<size_t>(j)], grid, quad);
    const AngularFlux phi = solve(g, j);
    const Vector b = apply_B(outflow_trace(phi, grid, quad), grid, quad);
    for (Index i = 0; i < detectors.size(); ++i)
      entries(i, j) = integrate_detector(b, detectors.arcs[static_cast<size_t>(i)], grid);
  }
  return entries;
}

}  // namespace

SourceSet make_ring_sources(int count, Scalar arc_fraction, Scalar amplitude,
                            Scalar offset_angle) {
  if (count < 1) throw std::invalid_argument("make_ring_sources: need at least one source");
  SourceSet set;
  const Scalar spacing = kTwoPi / count;
  for (int j = 0; j < count; ++j)
    set.arcs.push_back({offset_angle + j * spacing, arc_fraction * spacing, amplitude});
  return set;
}

DetectorSet make_ring_detectors(int count, Scalar arc_fraction, Scalar offset_angle) {
  if (count < 1) throw std::invalid_argument("make_ring_detectors: need at least one detector");
  DetectorSet set;
  const Scalar spacing = kTwoPi / count;
  for (int i = 0; i < count; ++i)
    set.arcs.push_back({offset_angle + i * spacing, arc_fraction * spacing});
  return set;
}

BoundaryData source_inflow(const SourceArc& src, const SpatialGrid& grid,
                           const AngularQuadrature& quad) {
  BoundaryData g = BoundaryData::Zero(grid.num_faces(), quad.size());
  for (Index f = 0; f < grid.num_faces(); ++f) {
    const BoundaryFace& face = grid.boundary_faces[static_cast<size_t>(f)];
    if (!arc_contains(src.center_angle, src.width, face.center)) continue;
    for (Index k = 0; k < quad.size(); ++k)
      if (quad.directions.row(k).dot(face.normal) < 0) g(f, k) = src.amplitude;
  }
  return g;
}

Vector apply_B(const BoundaryData& trace, const SpatialGrid& grid,
               const AngularQuadrature& quad) {
  if (trace.rows() != grid.num_faces() || trace.cols() != quad.size())
    throw std::invalid_argument("apply_B: trace shape mismatch");
  Vector out = Vector::Zero(grid.num_faces());
  for (Index f = 0; f < grid.num_faces(); ++f) {
    const BoundaryFace& face = grid.boundary_faces[static_cast<size_t>(f)];
    for (Index k = 0; k < quad.size(); ++k) {
      const Scalar sn = quad.directions.row(k).dot(face.normal);
      if (sn > 0) out[f] += quad.weights[k] * sn * trace(f, k);
    }
  }
  return out;
}

std::vector<int> detector_faces(const DetectorArc& det, const SpatialGrid& grid) {
  std::vector<int> faces;
  for (Index f = 0; f < grid.num_faces(); ++f)
    if (arc_contains(det.center_angle, det.width,
                     grid.boundary_faces[static_cast<size_t>(f)].center))
      faces.push_back(static_cast<int>(f));
  return faces;
}

Scalar integrate_detector(const Vector& boundary_values, const DetectorArc& det,
                          const SpatialGrid& grid) {
  if (boundary_values.size() != grid.num_faces())
    throw std::invalid_argument("integrate_detector: face count mismatch");
  Scalar acc = 0;
  for (int f : detector_faces(det, grid))
    acc += grid.boundary_faces[static_cast<size_t>(f)].length * boundary_values[f];
  return acc;
}

std::uint64_t geometry_fingerprint(const SpatialGrid& grid, const AngularQuadrature& quad,
                                   const SourceSet& sources, const DetectorSet& detectors) {
  std::ostringstream text;
  text << "n=" << grid.n << ";radius=" << format_full(grid.radius)
       << ";ndir=" << quad.size() << ";sources=";
  for (const auto& s : sources.arcs)
    text << "(" << format_full(s.center_angle) << "," << format_full(s.width) << ","
         << format_full(s.amplitude) << ")";
  text << ";detectors=";
  for (const auto& d : detectors.arcs)
    text << "(" << format_full(d.center_angle) << "," << format_full(d.width) << ")";
  return fnv1a(text.str());
}

MeasurementMatrix assemble_measurements(const ParameterPair& params, const SourceSet& sources,
                                        const DetectorSet& detectors, const SpatialGrid& grid,
                                        const AngularQuadrature& quad,
                                        const SolveOptions& opts) {
  require_in_domain(params, "assemble_measurements");
  const AngularFlux zero_f = AngularFlux::Zero(grid.num_cells(), quad.size());
  MeasurementMatrix mm;
  mm.fingerprint = geometry_fingerprint(grid, quad, sources, detectors);
  mm.entries = measurement_columns(
      sources, detectors, grid, quad, [&](const BoundaryData& g, Index j) {
        try {
          return solve_forward(params, zero_f, g, grid, quad, opts);
        } catch (const SolverError& e) {
          throw SolverError("source column " + std::to_string(j) + ": " + e.what(),
                            e.achieved_residual());
        }
      });
  return mm;
}

MeasurementMatrix assemble_measurements(const TransportFactorization& fact,
                                        const SourceSet& sources, const DetectorSet& detectors) {
  const SpatialGrid& grid = fact.grid();
  const AngularQuadrature& quad = fact.quadrature();
  MeasurementMatrix mm;
  mm.fingerprint = geometry_fingerprint(grid, quad, sources, detectors);
  mm.entries = measurement_columns(sources, detectors, grid, quad,
                                   [&](const BoundaryData& g, Index) {
                                     return fact.solve(inflow_source(g, grid, quad));
                                   });
  return mm;
}

void save_measurements(const std::string& path, const MeasurementMatrix& mm) {
  std::ostringstream header;
  header << "radtomo measurements fingerprint=" << std::hex << mm.fingerprint << std::dec
         << " detectors=" << mm.entries.rows() << " sources=" << mm.entries.cols();
  write_matrix_csv(path, mm.entries, {header.str()});
}

MeasurementMatrix load_measurements(const std::string& path) {
  std::vector<std::string> comments;
  MeasurementMatrix mm;
  mm.entries = read_matrix_csv(path, &comments);
  bool found = false;
  Index rows = -1, cols = -1;
  for (const auto& line : comments) {
    std::istringstream ss(line);
    std::string word;
    while (ss >> word) {
      if (word.rfind("fingerprint=", 0) == 0) {
        mm.fingerprint = std::stoull(word.substr(12), nullptr, 16);
        found = true;
      } else if (word.rfind("detectors=", 0) == 0) {
        rows = std::stoll(word.substr(10));
      } else if (word.rfind("sources=", 0) == 0) {
        cols = std::stoll(word.substr(8));
      }
    }
  }
  if (!found) throw IoError(path + ": missing fingerprint header");
  if (rows != mm.entries.rows() || cols != mm.entries.cols())
    throw IoError(path + ": header declares " + std::to_string(rows) + "x" +
                  std::to_string(cols) + " but file holds " + std::to_string(mm.entries.rows()) +
                  "x" + std::to_string(mm.entries.cols()));
  return mm;
}

MeasurementMatrix load_measurements(const std::string& path,
                                    std::uint64_t expected_fingerprint) {
  MeasurementMatrix mm = load_measurements(path);
  if (mm.fingerprint != expected_fingerprint) {
    std::ostringstream msg;
    msg << path << ": geometry fingerprint mismatch (file " << std::hex << mm.fingerprint
        << ", expected " << expected_fingerprint << ")";
    throw FingerprintError(msg.str());
  }
  return mm;
}

}  // namespace radtomo
