#include "radtomo/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "radtomo/csv.hpp"
#include "radtomo/errors.hpp"
#include "radtomo/sensitivity.hpp"

namespace radtomo {

namespace {

constexpr Scalar kDegree = std::numbers::pi_v<Scalar> / 180;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

Scalar loglog_slope(const Vector& x, const Vector& y) {
  const Vector lx = x.array().log().matrix();
  const Vector ly = y.array().max(1e-300).log().matrix();
  const Vector dx = (lx.array() - lx.mean()).matrix();
  const Vector dy = (ly.array() - ly.mean()).matrix();
  return dx.dot(dy) / dx.squaredNorm();
}

void stamp_inclusions(const SpatialGrid& grid, const std::vector<Inclusion>& inclusions,
                      Vector& field) {
  for (const auto& inc : inclusions) {
    const Vec2 center(inc.cx, inc.cy);
    for (Index c = 0; c < grid.num_cells(); ++c)
      if ((grid.cell_center(c) - center).norm() <= inc.r) field[c] = inc.value;
  }
}

Vector random_interior_point(std::mt19937_64& rng, const Vector& reference, Scalar spread) {
  std::uniform_real_distribution<Scalar> dist(-spread, spread);
  Vector x = reference;
  for (Index i = 0; i < x.size(); ++i) x[i] *= 1 + dist(rng);
  return x;
}

}  // namespace

SpatialGrid make_grid(const ExperimentConfig& cfg) { return build_grid(cfg.n, cfg.radius); }

AngularQuadrature make_quadrature(const ExperimentConfig& cfg) {
  return build_quadrature(cfg.n_dir);
}

SourceSet make_sources(const ExperimentConfig& cfg) {
  return make_ring_sources(cfg.source_count, cfg.source_arc_fraction, cfg.source_amplitude,
                           cfg.source_offset_deg * kDegree);
}

DetectorSet make_detectors(const ExperimentConfig& cfg) {
  return make_ring_detectors(cfg.detector_count, cfg.detector_arc_fraction,
                             cfg.detector_offset_deg * kDegree);
}

ParameterPair phantom_parameters(const ExperimentConfig& cfg, const SpatialGrid& grid) {
  ParameterPair p = constant_parameters(grid, cfg.mu_background, cfg.sigma_background,
                                        cfg.mu_max, cfg.sigma_max);
  stamp_inclusions(grid, cfg.mu_inclusions, p.mu);
  stamp_inclusions(grid, cfg.sigma_inclusions, p.sigma);
  return p;
}

ParameterPair prior_parameters(const ExperimentConfig& cfg, const SpatialGrid& grid) {
  return constant_parameters(grid, cfg.mu_prior, cfg.sigma_prior, cfg.mu_max, cfg.sigma_max);
}

std::shared_ptr<MeasurementForwardMap> make_model(const ExperimentConfig& cfg) {
  return make_model(cfg, std::make_shared<SpatialGrid>(make_grid(cfg)),
                    std::make_shared<AngularQuadrature>(make_quadrature(cfg)));
}

std::shared_ptr<MeasurementForwardMap> make_model(const ExperimentConfig& cfg,
                                                  std::shared_ptr<const SpatialGrid> grid,
                                                  std::shared_ptr<const AngularQuadrature> quad) {
  return std::make_shared<MeasurementForwardMap>(std::move(grid), std::move(quad),
                                                 make_sources(cfg), make_detectors(cfg),
                                                 cfg.mu_max, cfg.sigma_max);
}

TikhonovProblem make_problem(const ExperimentConfig& cfg,
                             std::shared_ptr<MeasurementForwardMap> model, Vector data) {
  TikhonovProblem prob;
  prob.metric = std::make_shared<H1Metric>(model->grid());
  const Index m = model->grid().num_cells();
  prob.prior = MeasurementForwardMap::pack(prior_parameters(cfg, model->grid()));
  prob.lower = Vector::Zero(2 * m);
  prob.upper.resize(2 * m);
  prob.upper.head(m).setConstant(cfg.mu_max);
  prob.upper.tail(m).setConstant(cfg.sigma_max);
  prob.model = std::move(model);
  prob.data = std::move(data);
  prob.alpha0 = cfg.alpha0;
  prob.alpha_min = cfg.alpha_min;
  prob.cg_tol = cfg.cg_tol;
  prob.cg_max = cfg.cg_max;
  prob.step_tol = cfg.step_tol;
  prob.max_outer = cfg.max_outer;
  return prob;
}

bool CheckReport::all_pass() const {
  for (const auto& line : lines)
    if (!line.pass) return false;
  return !lines.empty();
}

CheckReport run_check(const ExperimentConfig& cfg, unsigned seed, std::ostream& log) {
  CheckReport report;
  const auto add = [&](const std::string& name, Scalar measured, const std::string& requirement,
                       bool pass) {
    report.lines.push_back({name, measured, requirement, pass});
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", measured);
    log << (pass ? "[PASS] " : "[FAIL] ") << name << ": measured " << buf << " (required "
        << requirement << ")\n";
  };

  const auto grid = std::make_shared<SpatialGrid>(make_grid(cfg));
  const auto quad = std::make_shared<AngularQuadrature>(make_quadrature(cfg));
  const Index m = grid->num_cells();
  std::mt19937_64 rng(seed);

  const Vector prior = MeasurementForwardMap::pack(prior_parameters(cfg, *grid));
  const Vector x = random_interior_point(rng, prior, 0.3);
  ParameterPair params;
  params.mu = x.head(m);
  params.sigma = x.tail(m);
  params.mu_max = cfg.mu_max;
  params.sigma_max = cfg.sigma_max;

  const AngularFlux zero_f = AngularFlux::Zero(m, quad->size());
  const BoundaryData unit_g = BoundaryData::Ones(grid->num_faces(), quad->size());
  const ForwardLinearization lin = linearize(params, zero_f, unit_g, *grid, *quad);

  // adjoint identity
  {
    std::uniform_real_distribution<Scalar> dist(-1, 1);
    const auto rand_vec = [&](Index size) {
      Vector v(size);
      for (Index i = 0; i < size; ++i) v[i] = dist(rng);
      return v;
    };
    Scalar worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      ParameterVariation h{rand_vec(m).cwiseProduct(params.mu),
                           rand_vec(m).cwiseProduct(params.sigma)};
      AngularFlux y(m, quad->size());
      for (Index k = 0; k < quad->size(); ++k) y.col(k) = rand_vec(m);
      const AngularFlux jh = apply_jacobian(lin, h);
      ParameterVariation jty = apply_adjoint(lin, y);
      if (cfg.break_adjoint) jty.mu *= 1 + 1e-6;  // test hook: negative control
      const Scalar lhs = flux_inner(*grid, *quad, jh, y);
      const Scalar rhs = grid->cell_area() * (h.mu.dot(jty.mu) + h.sigma.dot(jty.sigma));
      const Scalar denom = std::max<Scalar>(
          flux_norm(*grid, *quad, jh) * flux_norm(*grid, *quad, y), 1e-300);
      worst = std::max(worst, std::abs(lhs - rhs) / denom);
    }
    add("adjoint identity", worst, "<= 1e-10", worst <= 1e-10);
  }

  // Taylor remainder slopes
  {
    std::uniform_real_distribution<Scalar> dist(-1, 1);
    ParameterVariation v{params.mu, params.sigma};
    for (Index i = 0; i < m; ++i) {
      v.mu[i] *= 0.3 * dist(rng);
      v.sigma[i] *= 0.3 * dist(rng);
    }
    const AngularFlux w = apply_jacobian(lin, v);
    const AngularFlux hess = apply_hessian(lin, v, v);
    const Vector ts = (Vector(4) << 1e-1, 1e-2, 1e-3, 1e-4).finished();
    Vector rem1(4), rem2(4);
    for (int i = 0; i < 4; ++i) {
      ParameterPair pt = params;
      pt.mu += ts[i] * v.mu;
      pt.sigma += ts[i] * v.sigma;
      const AngularFlux phi_t = linearize(pt, zero_f, unit_g, *grid, *quad).base_flux();
      rem1[i] = flux_norm(*grid, *quad, phi_t - lin.base_flux() - ts[i] * w);
      rem2[i] = flux_norm(*grid, *quad,
                          phi_t - lin.base_flux() - ts[i] * w - (ts[i] * ts[i] / 2) * hess);
    }
    const Scalar slope1 = loglog_slope(ts, rem1);
    const Scalar slope2 = loglog_slope(ts, rem2);
    add("first-order Taylor slope", slope1, "within [1.8, 2.2]",
        slope1 >= 1.8 && slope1 <= 2.2);
    add("second-order Taylor slope", slope2, "within [2.7, 3.3]",
        slope2 >= 2.7 && slope2 <= 3.3);
  }

  // Tikhonov gradient against central differences
  {
    auto model = make_model(cfg, grid, quad);
    const Vector phantom = MeasurementForwardMap::pack(phantom_parameters(cfg, *grid));
    TikhonovProblem prob = make_problem(cfg, model, model->evaluate(phantom));
    const Scalar alpha = 1e-4;
    std::uniform_real_distribution<Scalar> dist(-1, 1);
    Scalar worst = 0;
    for (int trial = 0; trial < 2; ++trial) {
      const Vector xt = random_interior_point(rng, prior, 0.2);
      Vector d(2 * m);
      for (Index i = 0; i < 2 * m; ++i) d[i] = dist(rng) * xt[i];
      const Vector grad = tikhonov_gradient(xt, prob, alpha);
      const Scalar t = 1e-4;
      const Scalar fd = (tikhonov_value(xt + t * d, prob, alpha) -
                         tikhonov_value(xt - t * d, prob, alpha)) /
                        (2 * t);
      const Scalar dir = metric_inner_pair(*prob.metric, grad, d);
      worst = std::max(worst,
                       std::abs(fd - dir) / std::max<Scalar>(std::abs(fd), std::abs(dir)));
    }
    add("tikhonov gradient vs finite differences", worst, "<= 1e-5", worst <= 1e-5);
  }

  // Gauss-Newton step against a dense closed form on a fixed linear model
  {
    const SpatialGrid small = build_grid(6, 1.0);
    const Index ms = small.num_cells();
    std::uniform_real_distribution<Scalar> dist(-1, 1);
    Matrix jac(10, 2 * ms);
    for (Index i = 0; i < jac.rows(); ++i)
      for (Index j = 0; j < jac.cols(); ++j) jac(i, j) = dist(rng);

    class Affine : public ForwardMap {
     public:
      explicit Affine(const Matrix& j) : jac_(j) {}
      Index parameter_size() const override { return jac_.cols(); }
      Index data_size() const override { return jac_.rows(); }
      Vector evaluate(const Vector& x) override { return jac_ * x; }
      Vector linearize_at(const Vector& x) override { return jac_ * x; }
      Vector apply_jacobian(const Vector& h) const override { return jac_ * h; }
      Vector apply_jacobian_transpose(const Vector& y) const override {
        return jac_.transpose() * y;
      }

     private:
      const Matrix& jac_;
    };

    TikhonovProblem prob;
    prob.model = std::make_shared<Affine>(jac);
    prob.metric = std::make_shared<H1Metric>(small);
    prob.prior = Vector::Constant(2 * ms, 0.5);
    prob.lower = Vector::Constant(2 * ms, -1e30);
    prob.upper = Vector::Constant(2 * ms, 1e30);
    Vector data(10);
    for (Index i = 0; i < 10; ++i) data[i] = dist(rng);
    prob.data = data;

    const Vector x_n = prob.prior * 0.8;
    const Scalar alpha = 2e-3;
    const PgnStep step = pgn_step(x_n, prob, alpha);

    Matrix gram2 = Matrix::Zero(2 * ms, 2 * ms);
    gram2.topLeftCorner(ms, ms) = Matrix(prob.metric->gram());
    gram2.bottomRightCorner(ms, ms) = Matrix(prob.metric->gram());
    const Vector delta =
        Matrix(jac.transpose() * jac + alpha * gram2)
            .ldlt()
            .solve(jac.transpose() * (data - jac * x_n) + alpha * gram2 * (prob.prior - x_n));
    const Scalar rel = (step.candidate - (x_n + delta)).norm() / (x_n + delta).norm();
    add("gauss-newton step vs dense closed form", rel, "<= 1e-8", rel <= 1e-8);
  }

  return report;
}

CalibrationSummary run_calibrate(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::ostream& log) {
  ensure_dir(out_dir);
  const auto grid = std::make_shared<SpatialGrid>(make_grid(cfg));
  const auto quad = std::make_shared<AngularQuadrature>(make_quadrature(cfg));
  auto model = make_model(cfg, grid, quad);

  const ParameterPair phantom = phantom_parameters(cfg, *grid);
  const Vector m_phantom = model->evaluate(MeasurementForwardMap::pack(phantom));
  log << "phantom data assembled (" << model->data_size() << " entries, norm "
      << m_phantom.norm() << ")\n";

  TikhonovProblem prob = make_problem(cfg, model, m_phantom);
  const PgnResult result = run_pgn(prob, prob.prior, cfg.alpha_min);
  const Vector m_dagger = model->evaluate(result.x);

  CalibrationSummary summary;
  summary.iterations = static_cast<int>(result.history.size());
  summary.relative_misfit = (m_dagger - m_phantom).norm() / m_phantom.norm();
  log << "calibration finished after " << summary.iterations
      << " iterations, relative data misfit " << summary.relative_misfit << "\n";

  write_field_csv(join(out_dir, "phantom_mu.csv"), *grid, phantom.mu);
  write_field_csv(join(out_dir, "phantom_sigma.csv"), *grid, phantom.sigma);
  write_field_csv(join(out_dir, "x_dagger_mu.csv"), *grid, result.x.head(grid->num_cells()));
  write_field_csv(join(out_dir, "x_dagger_sigma.csv"), *grid, result.x.tail(grid->num_cells()));
  save_measurements(join(out_dir, "m_phantom.csv"),
                    {model->data_as_matrix(m_phantom), model->fingerprint()});
  save_measurements(join(out_dir, "m_dagger.csv"),
                    {model->data_as_matrix(m_dagger), model->fingerprint()});
  save_iteration_records(join(out_dir, "calibrate_history.csv"), result.history);
  return summary;
}

namespace {

struct CalibrationArtifacts {
  Vector x_dagger;
  Vector m_dagger;
};

CalibrationArtifacts load_artifacts(const SpatialGrid& grid, const MeasurementForwardMap& model,
                                    const std::string& out_dir) {
  CalibrationArtifacts art;
  const Vector mu = read_field_csv(join(out_dir, "x_dagger_mu.csv"), grid);
  const Vector sigma = read_field_csv(join(out_dir, "x_dagger_sigma.csv"), grid);
  art.x_dagger.resize(2 * grid.num_cells());
  art.x_dagger.head(grid.num_cells()) = mu;
  art.x_dagger.tail(grid.num_cells()) = sigma;
  const MeasurementMatrix mm =
      load_measurements(join(out_dir, "m_dagger.csv"), model.fingerprint());
  art.m_dagger = Eigen::Map<const Vector>(mm.entries.data(), mm.entries.size());
  return art;
}

}  // namespace

Scalar RateTable::fit_res_slope(Scalar lo, Scalar hi) const {
  std::vector<Index> keep;
  for (Index i = 0; i < alphas.size(); ++i)
    if (alphas[i] >= lo && alphas[i] <= hi) keep.push_back(i);
  Vector a(keep.size()), r(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) {
    a[static_cast<Index>(i)] = alphas[keep[i]];
    r[static_cast<Index>(i)] = res[keep[i]];
  }
  return loglog_slope(a, r);
}

Scalar RateTable::fit_err_slope(Scalar lo, Scalar hi) const {
  std::vector<Index> keep;
  for (Index i = 0; i < alphas.size(); ++i)
    if (alphas[i] >= lo && alphas[i] <= hi) keep.push_back(i);
  Vector a(keep.size()), e(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) {
    a[static_cast<Index>(i)] = alphas[keep[i]];
    e[static_cast<Index>(i)] = err[keep[i]];
  }
  return loglog_slope(a, e);
}

RateTable run_rates(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  const auto grid = std::make_shared<SpatialGrid>(make_grid(cfg));
  const auto quad = std::make_shared<AngularQuadrature>(make_quadrature(cfg));
  const CalibrationArtifacts art = [&] {
    const auto probe = make_model(cfg, grid, quad);
    return load_artifacts(*grid, *probe, out_dir);
  }();

  const Index count = static_cast<Index>(cfg.rate_alphas.size());
  RateTable table;
  table.alphas.resize(count);
  table.res.resize(count);
  table.err.resize(count);

  // independent minimizations, one per alpha
  const auto run_one = [&](Index i) -> std::pair<Scalar, Scalar> {
    auto model = make_model(cfg, grid, quad);
    TikhonovProblem prob = make_problem(cfg, model, art.m_dagger);
    const PgnResult result = run_pgn(prob, prob.prior, cfg.rate_alphas[static_cast<size_t>(i)]);
    const Scalar res = (model->evaluate(result.x) - art.m_dagger).norm();
    const Scalar err = metric_norm_pair(*prob.metric, result.x - art.x_dagger);
    return {res, err};
  };

  std::vector<std::future<std::pair<Scalar, Scalar>>> jobs;
  for (Index i = 0; i < count; ++i)
    jobs.push_back(std::async(std::launch::async, run_one, i));
  for (Index i = 0; i < count; ++i) {
    const auto [res, err] = jobs[static_cast<size_t>(i)].get();
    table.alphas[i] = cfg.rate_alphas[static_cast<size_t>(i)];
    table.res[i] = res;
    table.err[i] = err;
    log << "alpha " << table.alphas[i] << ": res " << res << ", err " << err << "\n";
  }

  table.res_slope = loglog_slope(table.alphas, table.res);
  table.err_slope = loglog_slope(table.alphas, table.err);
  log << "fitted slopes: res " << table.res_slope << ", err " << table.err_slope << "\n";

  Matrix rows(count, 3);
  rows.col(0) = table.alphas;
  rows.col(1) = table.res;
  rows.col(2) = table.err;
  write_matrix_csv(join(out_dir, "rates.csv"), rows, {"alpha,res,err"});
  return table;
}

PgnStudy run_pgn_study(const ExperimentConfig& cfg, const std::string& out_dir,
                       Scalar alpha_fixed, std::ostream& log) {
  ensure_dir(out_dir);
  const auto grid = std::make_shared<SpatialGrid>(make_grid(cfg));
  const auto quad = std::make_shared<AngularQuadrature>(make_quadrature(cfg));
  auto model = make_model(cfg, grid, quad);
  const CalibrationArtifacts art = load_artifacts(*grid, *model, out_dir);

  TikhonovProblem prob = make_problem(cfg, model, art.m_dagger);

  // minimizer at the fixed alpha, then a recorded restart from the prior
  const Vector x_alpha = run_pgn(prob, prob.prior, alpha_fixed).x;
  log << "fixed-alpha minimizer computed (alpha = " << alpha_fixed << ")\n";

  PgnStudy study;
  std::vector<Scalar> err_list;
  const PgnResult rerun = run_pgn(prob, prob.prior, alpha_fixed, [&](int, const Vector& x_n) {
    err_list.push_back(metric_norm_pair(*prob.metric, x_n - x_alpha));
  });
  study.records = rerun.history;
  study.err = Eigen::Map<const Vector>(err_list.data(), static_cast<Index>(err_list.size()));

  while (study.burn_in < static_cast<int>(study.records.size()) &&
         study.records[static_cast<size_t>(study.burn_in)].alpha >
             alpha_fixed * (1 + 1e-12))
    ++study.burn_in;

  // geometric tail ratio on the decaying stretch beyond the burn-in
  const Index n_total = study.err.size();
  const Scalar floor = 5 * std::max<Scalar>(study.err[n_total - 1], 1e-300);
  std::vector<Scalar> ns, ls;
  for (Index i = study.burn_in; i < n_total; ++i) {
    if (study.err[i] <= 0) break;
    ns.push_back(static_cast<Scalar>(i));
    ls.push_back(std::log(study.err[i]));
    if (study.err[i] < floor && ns.size() >= 3) break;
  }
  if (ns.size() >= 2) {
    const Vector nv = Eigen::Map<const Vector>(ns.data(), static_cast<Index>(ns.size()));
    const Vector lv = Eigen::Map<const Vector>(ls.data(), static_cast<Index>(ls.size()));
    const Vector dn = (nv.array() - nv.mean()).matrix();
    const Vector dl = (lv.array() - lv.mean()).matrix();
    study.tail_ratio = std::exp(dn.dot(dl) / dn.squaredNorm());
  }
  log << "geometric tail ratio " << study.tail_ratio << " over "
      << (study.err.size() - study.burn_in) << " post-burn-in iterations\n";

  Matrix rows(study.err.size(), 4);
  for (Index i = 0; i < study.err.size(); ++i) {
    rows(i, 0) = static_cast<Scalar>(study.records[static_cast<size_t>(i)].n);
    rows(i, 1) = study.records[static_cast<size_t>(i)].alpha;
    rows(i, 2) = study.records[static_cast<size_t>(i)].residual;
    rows(i, 3) = study.err[i];
  }
  write_matrix_csv(join(out_dir, "pgn.csv"), rows, {"n,alpha,res,err"});
  return study;
}

void run_forward_dump(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::ostream& log) {
  ensure_dir(out_dir);
  const SpatialGrid grid = make_grid(cfg);
  const AngularQuadrature quad = make_quadrature(cfg);
  const ParameterPair phantom = phantom_parameters(cfg, grid);
  const SourceSet sources = make_sources(cfg);
  const DetectorSet detectors = make_detectors(cfg);
  const AngularFlux zero_f = AngularFlux::Zero(grid.num_cells(), quad.size());
  SolveOptions opts;
  opts.rtol = cfg.rtol;
  opts.max_iter = cfg.max_iter;

  write_quadrature_csv(join(out_dir, "quadrature.csv"), quad);
  for (Index j = 0; j < sources.size(); ++j) {
    const BoundaryData g = source_inflow(sources.arcs[static_cast<size_t>(j)], grid, quad);
    const AngularFlux phi = solve_forward(phantom, zero_f, g, grid, quad, opts);
    const AngularFlux mean = apply_theta(phi, quad);
    write_field_csv(join(out_dir, "phi_mean_src" + std::to_string(j) + ".csv"), grid,
                    mean.col(0));
    for (Index k = 0; k < quad.size(); ++k)
      write_field_csv(
          join(out_dir, "phi_dir" + std::to_string(k) + "_src" + std::to_string(j) + ".csv"),
          grid, phi.col(k));

    const Vector b = apply_B(outflow_trace(phi, grid, quad), grid, quad);
    Matrix face_table(grid.num_faces(), 3);
    for (Index f = 0; f < grid.num_faces(); ++f) {
      face_table(f, 0) = grid.boundary_faces[static_cast<size_t>(f)].center.x();
      face_table(f, 1) = grid.boundary_faces[static_cast<size_t>(f)].center.y();
      face_table(f, 2) = b[f];
    }
    write_matrix_csv(join(out_dir, "bphi_src" + std::to_string(j) + ".csv"), face_table,
                     {"x,y,B"});
  }

  const MeasurementMatrix mm = assemble_measurements(phantom, sources, detectors, grid, quad, opts);
  save_measurements(join(out_dir, "measurements.csv"), mm);
  log << "forward dump written for " << sources.size() << " sources\n";
}

}  // namespace radtomo
