#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radtomo/transport.hpp"

namespace radtomo {

/// Boundary arc illuminating the object: isotropic constant inflow over the
/// faces whose centers fall inside the arc.
struct SourceArc {
  Scalar center_angle = 0;  ///< radians
  Scalar width = 0;         ///< angular width, radians
  Scalar amplitude = 1;     ///< inflow profile value
};

/// Boundary arc recording outgoing light.
struct DetectorArc {
  Scalar center_angle = 0;
  Scalar width = 0;
};

struct SourceSet {
  std::vector<SourceArc> arcs;
  Index size() const { return static_cast<Index>(arcs.size()); }
};

struct DetectorSet {
  std::vector<DetectorArc> arcs;
  Index size() const { return static_cast<Index>(arcs.size()); }
};

/// `count` arcs uniformly spaced on the circle starting at `offset_angle`,
/// each `arc_fraction` of the inter-arc spacing wide.
SourceSet make_ring_sources(int count, Scalar arc_fraction, Scalar amplitude,
                            Scalar offset_angle);
DetectorSet make_ring_detectors(int count, Scalar arc_fraction, Scalar offset_angle);

/// Inflow data of one source: amplitude on (face, direction) pairs with the
/// face center inside the arc and s·n < 0, zero elsewhere.
BoundaryData source_inflow(const SourceArc& src, const SpatialGrid& grid,
                           const AngularQuadrature& quad);

/// Boundary outflow density: per face, sum_k w_k (s_k·n)^+ trace(face, k).
Vector apply_B(const BoundaryData& trace, const SpatialGrid& grid,
               const AngularQuadrature& quad);

/// Faces whose centers fall inside the detector arc.
std::vector<int> detector_faces(const DetectorArc& det, const SpatialGrid& grid);

/// Integral of a per-face boundary density over the detector arc
/// (face-length weighted sum over member faces).
Scalar integrate_detector(const Vector& boundary_values, const DetectorArc& det,
                          const SpatialGrid& grid);

struct MeasurementMatrix {
  Matrix entries;  ///< detectors x sources
  std::uint64_t fingerprint = 0;
};

/// Hash of grid resolution, radius, direction count and source/detector
/// layout; persisted with measurement files to reject stale data.
std::uint64_t geometry_fingerprint(const SpatialGrid& grid, const AngularQuadrature& quad,
                                   const SourceSet& sources, const DetectorSet& detectors);

/// Column j holds the detector integrals of the outflow density of the
/// forward solution illuminated by source j. Emits a warning to stderr for
/// detectors whose arc captures no boundary face.
MeasurementMatrix assemble_measurements(const ParameterPair& params, const SourceSet& sources,
                                        const DetectorSet& detectors, const SpatialGrid& grid,
                                        const AngularQuadrature& quad,
                                        const SolveOptions& opts = {});

/// Variant reusing a transport factorization built at the same parameters.
MeasurementMatrix assemble_measurements(const TransportFactorization& fact,
                                        const SourceSet& sources, const DetectorSet& detectors);

void save_measurements(const std::string& path, const MeasurementMatrix& mm);
MeasurementMatrix load_measurements(const std::string& path);
/// Load and verify the fingerprint; throws FingerprintError on mismatch.
MeasurementMatrix load_measurements(const std::string& path, std::uint64_t expected_fingerprint);

}  // namespace radtomo
