#ifndef STELLBENCH_GEOMETRY_HPP
#define STELLBENCH_GEOMETRY_HPP

// Geometric figures of merit of a plasma boundary. Cross-section integrals
// use Green's theorem on the analytic theta-derivatives with the periodic
// trapezoidal rule, which is exact for the trigonometric integrands as long
// as n_theta exceeds 4 m_max.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "stellbench/boundary.hpp"

namespace stellbench {

struct GeometryOptions {
  int n_theta = 64;
  int n_phi = 64;
  // Start of the toroidal grid; metrics are periodic in 2 pi / N_fp.
  double phi_offset = 0.0;
  // Golden-section polish of the worst plane in max_elongation.
  bool refine_extremes = true;
};

template <typename Scalar>
struct CrossSectionT {
  Scalar phi{};
  // Closed polyline: first point repeated at the end.
  std::vector<std::pair<Scalar, Scalar>> polyline;
  Scalar area{};
  std::pair<Scalar, Scalar> centroid{};
  // Central second moments of the enclosed region.
  Scalar i_rr{}, i_zz{}, i_rz{};
  // Integral of R dA; the toroidal volume density of this plane.
  Scalar r_moment{};

  Scalar elongation() const {
    using std::sqrt;
    const Scalar tr = i_rr + i_zz;
    const Scalar disc = sqrt((i_rr - i_zz) * (i_rr - i_zz) + Scalar(4) * i_rz * i_rz);
    const Scalar lo = (tr - disc) / Scalar(2);
    const Scalar hi = (tr + disc) / Scalar(2);
    if (!(lo > Scalar(0))) throw DegenerateGeometryError("cross-section has a zero principal moment");
    return sqrt(hi / lo);
  }
};

using CrossSection = CrossSectionT<double>;

template <typename Scalar>
CrossSectionT<Scalar> cross_section(const PlasmaBoundaryT<Scalar>& bd, Scalar phi,
                                    int n_theta = 64) {
  using std::abs;
  if (n_theta < 4 * bd.m_max() + 1) n_theta = 4 * bd.m_max() + 1;
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  const auto thetas = uniform_grid<Scalar>(n_theta, two_pi);
  const auto s = sample_section(bd, phi, std::span<const Scalar>(thetas));
  const Scalar w = two_pi / Scalar(n_theta);

  CrossSectionT<Scalar> cs;
  cs.phi = phi;
  Scalar area = (s.r.array() * s.z_theta.array()).sum() * w;
  const Scalar scale = bd.major_radius();
  if (!(abs(area) > Scalar(1e-14) * scale * scale)) {
    throw DegenerateGeometryError("cross-section has zero area");
  }
  // Clockwise parameterisations flip every Green's theorem integral.
  const Scalar orient = area > Scalar(0) ? Scalar(1) : Scalar(-1);
  area *= orient;
  const Scalar r_moment =
      orient * (s.r.array().square() * s.z_theta.array()).sum() * w / Scalar(2);
  const Scalar z_moment =
      -orient * (s.z.array().square() * s.r_theta.array()).sum() * w / Scalar(2);
  const Scalar rc = r_moment / area;
  const Scalar zc = z_moment / area;
  const auto dr = (s.r.array() - rc).eval();
  const auto dz = (s.z.array() - zc).eval();
  cs.area = area;
  cs.centroid = {rc, zc};
  cs.r_moment = r_moment;
  cs.i_rr = orient * (dr.cube() * s.z_theta.array()).sum() * w / Scalar(3);
  cs.i_zz = -orient * (dz.cube() * s.r_theta.array()).sum() * w / Scalar(3);
  cs.i_rz = orient * (dr.square() * dz * s.z_theta.array()).sum() * w / Scalar(2);
  cs.polyline.reserve(static_cast<std::size_t>(n_theta) + 1);
  for (int i = 0; i < n_theta; ++i) cs.polyline.emplace_back(s.r(i), s.z(i));
  cs.polyline.push_back(cs.polyline.front());
  return cs;
}

namespace detail {

template <typename Scalar>
std::vector<Scalar> phi_planes(const PlasmaBoundaryT<Scalar>& bd, const GeometryOptions& opt) {
  const Scalar period = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(bd.n_field_periods);
  return uniform_grid<Scalar>(opt.n_phi, period, Scalar(opt.phi_offset));
}

// Maximises f on [a, b] by golden-section search.
template <typename Scalar, typename F>
std::pair<Scalar, Scalar> golden_max(F&& f, Scalar a, Scalar b, int iterations = 60) {
  using std::abs;
  const Scalar g = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar c = b - g * (b - a);
  Scalar d = a + g * (b - a);
  Scalar fc = f(c);
  Scalar fd = f(d);
  for (int it = 0; it < iterations && abs(b - a) > Scalar(1e-12); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc > fd ? std::pair{c, fc} : std::pair{d, fd};
}

// Locates an extremum of R or Z along theta at fixed phi: grid search
// followed by Newton iterations on the derivative.
template <typename Scalar>
std::pair<Scalar, Scalar> section_extremum(const PlasmaBoundaryT<Scalar>& bd, Scalar phi,
                                           bool use_z, bool maximize, int n_search) {
  using std::abs;
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  const auto thetas = uniform_grid<Scalar>(n_search, two_pi);
  const auto s = sample_section(bd, phi, std::span<const Scalar>(thetas));
  const VectorX<Scalar>& v = use_z ? s.z : s.r;
  const Scalar sign = maximize ? Scalar(1) : Scalar(-1);
  Eigen::Index best = 0;
  (sign * v).maxCoeff(&best);
  Scalar t = thetas[static_cast<std::size_t>(best)];
  const Scalar h = two_pi / Scalar(n_search);
  Scalar t_best = t;
  Scalar v_best = v(best);
  for (int it = 0; it < 20; ++it) {
    const Scalar one[1] = {t};
    const auto p = sample_section(bd, phi, std::span<const Scalar>(one, 1));
    const Scalar d1 = use_z ? p.z_theta(0) : p.r_theta(0);
    const Scalar d2 = use_z ? p.z_theta2(0) : p.r_theta2(0);
    const Scalar val = use_z ? p.z(0) : p.r(0);
    if (sign * val >= sign * v_best) {
      v_best = val;
      t_best = t;
    }
    if (sign * d2 >= Scalar(0)) break;  // wrong curvature, keep grid value
    const Scalar step = -d1 / d2;
    if (abs(step) < Scalar(1e-15)) break;
    t += step;
    if (abs(t - thetas[static_cast<std::size_t>(best)]) > h) break;
  }
  return {t_best, v_best};
}

}  // namespace detail

// Mean cross-section area and toroidal volume over one field period.
template <typename Scalar>
struct VolumeAreaT {
  Scalar mean_area{};
  Scalar volume{};
};

template <typename Scalar>
VolumeAreaT<Scalar> volume_and_mean_area(const PlasmaBoundaryT<Scalar>& bd,
                                         const GeometryOptions& opt = {}) {
  validate(bd);
  const auto planes = detail::phi_planes(bd, opt);
  Scalar area = 0;
  Scalar r_moment = 0;
  for (Scalar phi : planes) {
    const auto cs = cross_section(bd, phi, opt.n_theta);
    area += cs.area;
    r_moment += cs.r_moment;
  }
  area /= Scalar(planes.size());
  r_moment /= Scalar(planes.size());
  return {area, Scalar(2) * std::numbers::pi_v<Scalar> * r_moment};
}

// Effective minor radius a = sqrt(mean area / pi).
template <typename Scalar>
Scalar minor_radius(const PlasmaBoundaryT<Scalar>& bd, const GeometryOptions& opt = {}) {
  using std::sqrt;
  return sqrt(volume_and_mean_area(bd, opt).mean_area / std::numbers::pi_v<Scalar>);
}

// R0 / a with a from the mean cross-section area and R0 = V / (2 pi^2 a^2).
template <typename Scalar>
Scalar aspect_ratio(const PlasmaBoundaryT<Scalar>& bd, const GeometryOptions& opt = {}) {
  using std::sqrt;
  const auto va = volume_and_mean_area(bd, opt);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar a2 = va.mean_area / pi;
  const Scalar r0 = va.volume / (Scalar(2) * pi * pi * a2);
  return r0 / sqrt(a2);
}

template <typename Scalar>
Scalar elongation_at(const PlasmaBoundaryT<Scalar>& bd, Scalar phi, int n_theta = 64) {
  return cross_section(bd, phi, n_theta).elongation();
}

template <typename Scalar>
Scalar max_elongation(const PlasmaBoundaryT<Scalar>& bd, int n_phi,
                      const GeometryOptions& opt = {}) {
  if (n_phi < 8) throw DomainError("max_elongation needs n_phi >= 8");
  validate(bd);
  GeometryOptions o = opt;
  o.n_phi = n_phi;
  const auto planes = detail::phi_planes(bd, o);
  std::vector<Scalar> values;
  values.reserve(planes.size());
  for (Scalar phi : planes) values.push_back(elongation_at(bd, phi, o.n_theta));
  const auto it = std::max_element(values.begin(), values.end());
  Scalar best = *it;
  if (o.refine_extremes) {
    const std::size_t j = static_cast<std::size_t>(it - values.begin());
    const Scalar h = planes.size() > 1 ? planes[1] - planes[0] : Scalar(0);
    const Scalar centre = planes[j];
    const auto [phi_star, value] = detail::golden_max<Scalar>(
        [&](Scalar p) { return elongation_at(bd, p, o.n_theta); }, centre - h, centre + h);
    (void)phi_star;
    best = std::max(best, value);
  }
  return best;
}

template <typename Scalar>
Scalar max_elongation(const PlasmaBoundaryT<Scalar>& bd, const GeometryOptions& opt = {}) {
  return max_elongation(bd, opt.n_phi, opt);
}

// (R_centroid - R at max Z) / half-width in R, for one toroidal plane.
template <typename Scalar>
Scalar triangularity_at(const PlasmaBoundaryT<Scalar>& bd, Scalar phi, int n_theta = 64) {
  const auto cs = cross_section(bd, phi, n_theta);
  const int n_search = std::max(256, 4 * n_theta);
  const auto [t_top, z_top] = detail::section_extremum(bd, phi, true, true, n_search);
  (void)z_top;
  const Scalar one[1] = {t_top};
  const Scalar r_top = sample_section(bd, phi, std::span<const Scalar>(one, 1)).r(0);
  const Scalar r_max = detail::section_extremum(bd, phi, false, true, n_search).second;
  const Scalar r_min = detail::section_extremum(bd, phi, false, false, n_search).second;
  const Scalar half_width = (r_max - r_min) / Scalar(2);
  if (!(half_width > Scalar(0))) throw DegenerateGeometryError("cross-section has zero width");
  return (cs.centroid.first - r_top) / half_width;
}

// Mean of the triangularity at the two symmetric planes phi = 0 and pi/N_fp.
template <typename Scalar>
Scalar average_triangularity(const PlasmaBoundaryT<Scalar>& bd, const GeometryOptions& opt = {}) {
  validate(bd);
  if (!bd.stellarator_symmetric) {
    throw UnsupportedConfigurationError("average triangularity needs a stellarator-symmetric boundary");
  }
  const Scalar half = std::numbers::pi_v<Scalar> / Scalar(bd.n_field_periods);
  return (triangularity_at(bd, Scalar(0), opt.n_theta) + triangularity_at(bd, half, opt.n_theta)) /
         Scalar(2);
}

namespace detail {

template <typename Scalar>
bool segments_cross(std::pair<Scalar, Scalar> p1, std::pair<Scalar, Scalar> p2,
                    std::pair<Scalar, Scalar> q1, std::pair<Scalar, Scalar> q2) {
  auto orient = [](auto a, auto b, auto c) {
    const Scalar v = (b.first - a.first) * (c.second - a.second) -
                     (b.second - a.second) * (c.first - a.first);
    return (v > Scalar(0)) - (v < Scalar(0));
  };
  const int o1 = orient(p1, p2, q1);
  const int o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1);
  const int o4 = orient(q1, q2, p2);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

}  // namespace detail

// Detects self-intersecting cross-sections on the evaluation grid.
template <typename Scalar>
bool has_self_intersection(const PlasmaBoundaryT<Scalar>& bd, const GeometryOptions& opt = {}) {
  validate(bd);
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  const auto thetas = uniform_grid<Scalar>(opt.n_theta, two_pi);
  for (Scalar phi : detail::phi_planes(bd, opt)) {
    const auto s = sample_section(bd, phi, std::span<const Scalar>(thetas));
    const int n = static_cast<int>(thetas.size());
    for (int i = 0; i < n; ++i) {
      const std::pair<Scalar, Scalar> a{s.r(i), s.z(i)};
      const std::pair<Scalar, Scalar> b{s.r((i + 1) % n), s.z((i + 1) % n)};
      for (int j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        const std::pair<Scalar, Scalar> c{s.r(j), s.z(j)};
        const std::pair<Scalar, Scalar> d{s.r((j + 1) % n), s.z((j + 1) % n)};
        if (detail::segments_cross(a, b, c, d)) return true;
      }
    }
  }
  return false;
}

}  // namespace stellbench

#endif  // STELLBENCH_GEOMETRY_HPP
