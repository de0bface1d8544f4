#include "radtomo/forward_map.hpp"

#include <stdexcept>

namespace radtomo {

MeasurementForwardMap::MeasurementForwardMap(std::shared_ptr<const SpatialGrid> grid,
                                             std::shared_ptr<const AngularQuadrature> quad,
                                             SourceSet sources, DetectorSet detectors,
                                             Scalar mu_max, Scalar sigma_max)
    : grid_(std::move(grid)),
      quad_(std::move(quad)),
      sources_(std::move(sources)),
      detectors_(std::move(detectors)),
      mu_max_(mu_max),
      sigma_max_(sigma_max) {
  source_terms_.reserve(static_cast<size_t>(sources_.size()));
  for (const auto& arc : sources_.arcs)
    source_terms_.push_back(inflow_source(source_inflow(arc, *grid_, *quad_), *grid_, *quad_));
  det_faces_.reserve(static_cast<size_t>(detectors_.size()));
  for (const auto& arc : detectors_.arcs) det_faces_.push_back(detector_faces(arc, *grid_));
}

ParameterPair MeasurementForwardMap::unpack(const Vector& x) const {
  const Index m = grid_->num_cells();
  if (x.size() != 2 * m)
    throw std::invalid_argument("MeasurementForwardMap: parameter vector size mismatch");
  ParameterPair p;
  p.mu = x.head(m);
  p.sigma = x.tail(m);
  p.mu_max = mu_max_;
  p.sigma_max = sigma_max_;
  return p;
}

Vector MeasurementForwardMap::pack(const ParameterPair& p) {
  Vector x(p.mu.size() + p.sigma.size());
  x.head(p.mu.size()) = p.mu;
  x.tail(p.sigma.size()) = p.sigma;
  return x;
}

Matrix MeasurementForwardMap::data_as_matrix(const Vector& data) const {
  if (data.size() != data_size())
    throw std::invalid_argument("MeasurementForwardMap: data vector size mismatch");
  return Eigen::Map<const Matrix>(data.data(), detectors_.size(), sources_.size());
}

std::uint64_t MeasurementForwardMap::fingerprint() const {
  return geometry_fingerprint(*grid_, *quad_, sources_, detectors_);
}

Vector MeasurementForwardMap::measure(const TransportFactorization& fact) const {
  const Index num_det = detectors_.size();
  Vector out(data_size());
  for (Index j = 0; j < sources_.size(); ++j) {
    const AngularFlux phi = fact.solve(source_terms_[static_cast<size_t>(j)]);
    const Vector b = apply_B(outflow_trace(phi, *grid_, *quad_), *grid_, *quad_);
    for (Index i = 0; i < num_det; ++i)
      out[i + num_det * j] =
          integrate_detector(b, detectors_.arcs[static_cast<size_t>(i)], *grid_);
  }
  return out;
}

Vector MeasurementForwardMap::evaluate(const Vector& x) {
  const auto params = std::make_shared<ParameterPair>(unpack(x));
  require_in_domain(*params, "MeasurementForwardMap::evaluate");
  const TransportFactorization fact(grid_, quad_, params);
  return measure(fact);
}

Vector MeasurementForwardMap::linearize_at(const Vector& x) {
  const auto params = std::make_shared<ParameterPair>(unpack(x));
  require_in_domain(*params, "MeasurementForwardMap::linearize_at");
  auto fact = std::make_shared<const TransportFactorization>(grid_, quad_, params);

  lins_.clear();
  lins_.reserve(static_cast<size_t>(sources_.size()));
  const Index num_det = detectors_.size();
  Vector out(data_size());
  for (Index j = 0; j < sources_.size(); ++j) {
    AngularFlux phi = fact->solve(source_terms_[static_cast<size_t>(j)]);
    const Vector b = apply_B(outflow_trace(phi, *grid_, *quad_), *grid_, *quad_);
    for (Index i = 0; i < num_det; ++i)
      out[i + num_det * j] =
          integrate_detector(b, detectors_.arcs[static_cast<size_t>(i)], *grid_);
    lins_.emplace_back(fact, std::move(phi));
  }
  return out;
}

Vector MeasurementForwardMap::apply_jacobian(const Vector& h) const {
  if (lins_.empty())
    throw std::logic_error("MeasurementForwardMap: linearize_at must be called first");
  const Index m = grid_->num_cells();
  if (h.size() != 2 * m)
    throw std::invalid_argument("MeasurementForwardMap: variation size mismatch");
  ParameterVariation var{h.head(m), h.tail(m)};

  const Index num_det = detectors_.size();
  Vector out(data_size());
  for (Index j = 0; j < sources_.size(); ++j) {
    const AngularFlux w = radtomo::apply_jacobian(lins_[static_cast<size_t>(j)], var);
    const Vector b = apply_B(outflow_trace(w, *grid_, *quad_), *grid_, *quad_);
    for (Index i = 0; i < num_det; ++i)
      out[i + num_det * j] =
          integrate_detector(b, detectors_.arcs[static_cast<size_t>(i)], *grid_);
  }
  return out;
}

Vector MeasurementForwardMap::apply_jacobian_transpose(const Vector& y) const {
  if (lins_.empty())
    throw std::logic_error("MeasurementForwardMap: linearize_at must be called first");
  if (y.size() != data_size())
    throw std::invalid_argument("MeasurementForwardMap: data vector size mismatch");
  const Index m = grid_->num_cells();
  const Index num_det = detectors_.size();
  const Index K = quad_->size();

  Vector acc = Vector::Zero(2 * m);
  for (Index j = 0; j < sources_.size(); ++j) {
    // Transpose of detector integration and the outflow functional: spread
    // detector weights onto outflow (cell, direction) slots with s.n > 0.
    AngularFlux costate_src = AngularFlux::Zero(m, K);
    for (Index i = 0; i < num_det; ++i) {
      const Scalar col_weight = y[i + num_det * j];
      if (col_weight == 0) continue;
      for (int f : det_faces_[static_cast<size_t>(i)]) {
        const BoundaryFace& face = grid_->boundary_faces[static_cast<size_t>(f)];
        for (Index k = 0; k < K; ++k) {
          const Scalar sn = quad_->directions.row(k).dot(face.normal);
          if (sn > 0) costate_src(face.cell, k) += sn * face.length * col_weight;
        }
      }
    }
    const ParameterVariation g = apply_adjoint(lins_[static_cast<size_t>(j)], costate_src);
    acc.head(m) += g.mu;
    acc.tail(m) += g.sigma;
  }
  return acc;
}

}  // namespace radtomo
