#pragma once

#include <memory>
#include <vector>

#include "radtomo/inversion.hpp"
#include "radtomo/measurement.hpp"
#include "radtomo/sensitivity.hpp"

namespace radtomo {

/// Parameter-to-measurement map F(x) = vec(M(mu, sigma)) with exact
/// discrete derivatives. Data entries are flattened column-major
/// (detector index fastest), parameters stacked as [mu; sigma].
class MeasurementForwardMap : public ForwardMap {
 public:
  MeasurementForwardMap(std::shared_ptr<const SpatialGrid> grid,
                        std::shared_ptr<const AngularQuadrature> quad, SourceSet sources,
                        DetectorSet detectors, Scalar mu_max, Scalar sigma_max);

  Index parameter_size() const override { return 2 * grid_->num_cells(); }
  Index data_size() const override { return detectors_.size() * sources_.size(); }

  Vector evaluate(const Vector& x) override;
  Vector linearize_at(const Vector& x) override;
  Vector apply_jacobian(const Vector& h) const override;
  Vector apply_jacobian_transpose(const Vector& y) const override;

  const SpatialGrid& grid() const { return *grid_; }
  const AngularQuadrature& quadrature() const { return *quad_; }
  const SourceSet& sources() const { return sources_; }
  const DetectorSet& detectors() const { return detectors_; }
  std::uint64_t fingerprint() const;

  ParameterPair unpack(const Vector& x) const;
  static Vector pack(const ParameterPair& p);
  Matrix data_as_matrix(const Vector& data) const;

 private:
  Vector measure(const TransportFactorization& fact) const;

  std::shared_ptr<const SpatialGrid> grid_;
  std::shared_ptr<const AngularQuadrature> quad_;
  SourceSet sources_;
  DetectorSet detectors_;
  Scalar mu_max_;
  Scalar sigma_max_;
  std::vector<AngularFlux> source_terms_;       // inflow_source(g_j), cached
  std::vector<std::vector<int>> det_faces_;     // arc membership, cached

  // linearization state
  std::vector<ForwardLinearization> lins_;      // one per source, shared factorization
};

}  // namespace radtomo
