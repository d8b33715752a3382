#include <cmath>
#include <numbers>

#include "stellbench/errors.hpp"
#include "stellbench/geometry.hpp"
#include "stellbench/oracle.hpp"

namespace stellbench {

SyntheticFields synthetic_fields(const PlasmaBoundary& b) {
  const double r00 = b.major_radius();
  auto r = [&](int m, int n) { return std::abs(n) <= b.n_max() && m <= b.m_max() ? b.r(m, n) / r00 : 0.0; };
  auto z = [&](int m, int n) { return std::abs(n) <= b.n_max() && m <= b.m_max() ? b.z(m, n) / r00 : 0.0; };

  const double helicity = r(1, 1) - z(1, 1);
  const double torsion = r(0, 1) - z(0, 1);
  double s2 = 0.0;
  for (int m = 0; m <= b.m_max(); ++m) {
    for (int n = -b.n_max(); n <= b.n_max(); ++n) {
      if (m < 2 && std::abs(n) < 2) continue;
      const double w = double(m + std::abs(n));
      s2 += w * w * (r(m, n) * r(m, n) + z(m, n) * z(m, n));
    }
  }
  double a2 = 0.0;
  for (int n : {-2, -1, 1, 2}) a2 += r(0, n) * r(0, n) + z(0, n) * z(0, n);
  const double e2 = r(1, -1) * r(1, -1) + z(1, -1) * z(1, -1);

  SyntheticFields f{};
  f.iota_edge_over_nfp = 0.05 + 0.45 * std::tanh(4.0 * helicity + 2.0 * torsion);
  f.edge_mirror_ratio = 0.1 + 0.8 * std::tanh(5.0 * a2 + s2);
  f.qi_residual = 1e-5 * (1.0 + 1e3 * s2 + 1e2 * e2);
  f.vacuum_well = 0.01 + 0.5 * r(2, 0) - 0.5 * s2;
  f.flux_compression = 0.5 + 2.0 * (r(1, 0) - z(1, 0)) * (r(1, 0) - z(1, 0)) + 0.5 * s2;
  f.min_normalized_grad_scale_length =
      10.0 / (1.0 + 5.0 * s2 + 10.0 * (r(1, 1) * r(1, 1) + z(1, 1) * z(1, 1)));
  return f;
}

Eigen::MatrixXd synthetic_boozer_field(const SyntheticFields& f, int n_theta, int n_phi) {
  constexpr double kTwoPi = 2 * std::numbers::pi;
  Eigen::MatrixXd b(n_theta, n_phi);
  const double ripple = std::sqrt(2.0 * f.qi_residual);
  for (int j = 0; j < n_phi; ++j) {
    const double zeta = kTwoPi * j / n_phi;
    for (int i = 0; i < n_theta; ++i) {
      const double theta = kTwoPi * i / n_theta;
      b(i, j) = 1.0 - f.edge_mirror_ratio * std::cos(zeta) + ripple * std::cos(theta - zeta);
    }
  }
  return b;
}

OracleResponse SyntheticOracle::evaluate(const OracleRequest& request) {
  const auto& b = request.boundary;
  try {
    validate(b);
  } catch (const InvalidBoundaryError& e) {
    return OracleResponse::failure(OracleErrorKind::protocol, e.what());
  }
  const auto res = request.fidelity == Fidelity::low ? options_.low_resolution : options_.high_resolution;
  GeometryOptions opt;
  opt.n_theta = res[0];
  opt.n_phi = res[1];
  try {
    if (has_self_intersection(b, opt)) {
      return OracleResponse::failure(OracleErrorKind::solver_failed, "self-intersecting boundary");
    }
    const auto thetas = uniform_grid(opt.n_theta, 2 * std::numbers::pi);
    const auto phis = uniform_grid(opt.n_phi, 2 * std::numbers::pi / b.n_field_periods);
    if (evaluate_surface<double>(b, thetas, phis).r.minCoeff() < kSyntheticMinRadiusFraction * b.major_radius()) {
      return OracleResponse::failure(OracleErrorKind::solver_failed, "boundary approaches the symmetry axis");
    }
    EquilibriumMetrics m;
    m.aspect_ratio = aspect_ratio(b, opt);
    m.max_elongation = max_elongation(b, opt);
    m.average_triangularity = b.stellarator_symmetric ? average_triangularity(b, opt) : 0.0;
    const auto f = synthetic_fields(b);
    m.iota_edge_over_nfp = f.iota_edge_over_nfp;
    m.edge_mirror_ratio = f.edge_mirror_ratio;
    m.qi_residual = f.qi_residual;
    m.vacuum_well = f.vacuum_well;
    m.flux_compression = f.flux_compression;
    m.min_normalized_grad_scale_length = f.min_normalized_grad_scale_length;
    if (!(m.aspect_ratio > 1.0) || !std::isfinite(m.max_elongation)) {
      return OracleResponse::failure(OracleErrorKind::solver_failed, "unphysical geometry");
    }
    if (options_.include_boozer) m.boozer_b = synthetic_boozer_field(f, options_.boozer_n_theta, options_.boozer_n_phi);
    return OracleResponse::success(std::move(m));
  } catch (const DegenerateGeometryError& e) {
    return OracleResponse::failure(OracleErrorKind::solver_failed, e.what());
  }
}

}  // namespace stellbench
