#ifndef STELLBENCH_BOUNDARY_HPP
#define STELLBENCH_BOUNDARY_HPP

// Truncated double-Fourier plasma boundaries in cylindrical coordinates:
//
//   R(theta, phi) = sum_{m,n} R_mn cos(m theta - n N_fp phi)
//   Z(theta, phi) = sum_{m,n} Z_mn sin(m theta - n N_fp phi)
//
// with m in [0, m_max] and n in [-n_max, n_max]. Coefficient matrices are
// stored with row m and column n + n_max.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "stellbench/errors.hpp"

namespace stellbench {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct PlasmaBoundaryT {
  int n_field_periods = 1;
  MatrixX<Scalar> r_cos;
  MatrixX<Scalar> z_sin;
  bool stellarator_symmetric = true;

  int m_max() const { return static_cast<int>(r_cos.rows()) - 1; }
  int n_max() const { return (static_cast<int>(r_cos.cols()) - 1) / 2; }

  Scalar& r(int m, int n) { return r_cos(m, n + n_max()); }
  Scalar r(int m, int n) const { return r_cos(m, n + n_max()); }
  Scalar& z(int m, int n) { return z_sin(m, n + n_max()); }
  Scalar z(int m, int n) const { return z_sin(m, n + n_max()); }

  // Major radius coefficient R_{0,0}.
  Scalar major_radius() const { return r(0, 0); }

  template <typename NewScalar>
  PlasmaBoundaryT<NewScalar> cast() const {
    return {n_field_periods, r_cos.template cast<NewScalar>(),
            z_sin.template cast<NewScalar>(), stellarator_symmetric};
  }
};

using PlasmaBoundary = PlasmaBoundaryT<double>;

// Shape of a boundary's coefficient set; fixes the flatten() ordering.
struct BoundaryLayout {
  int n_field_periods = 3;
  int m_max = 4;
  int n_max = 4;
  bool stellarator_symmetric = true;

  bool operator==(const BoundaryLayout&) const = default;
};

template <typename Scalar>
BoundaryLayout layout_of(const PlasmaBoundaryT<Scalar>& b) {
  return {b.n_field_periods, b.m_max(), b.n_max(), b.stellarator_symmetric};
}

// All-zero boundary except R_{0,0} = major_radius.
template <typename Scalar = double>
PlasmaBoundaryT<Scalar> make_boundary(const BoundaryLayout& layout,
                                      Scalar major_radius = Scalar(1)) {
  if (layout.n_field_periods < 1 || layout.m_max < 0 || layout.n_max < 0) {
    throw InvalidBoundaryError("boundary layout needs n_fp >= 1, m_max >= 0, n_max >= 0");
  }
  PlasmaBoundaryT<Scalar> b;
  b.n_field_periods = layout.n_field_periods;
  b.r_cos = MatrixX<Scalar>::Zero(layout.m_max + 1, 2 * layout.n_max + 1);
  b.z_sin = MatrixX<Scalar>::Zero(layout.m_max + 1, 2 * layout.n_max + 1);
  b.stellarator_symmetric = layout.stellarator_symmetric;
  b.r(0, 0) = major_radius;
  return b;
}

// Checks shapes, finiteness, R_00 > 0 and the symmetry zeros.
template <typename Scalar>
void validate(const PlasmaBoundaryT<Scalar>& b) {
  using std::isfinite;
  if (b.n_field_periods < 1) {
    throw InvalidBoundaryError("n_field_periods must be positive");
  }
  if (b.r_cos.rows() < 1 || b.r_cos.cols() < 1 || b.r_cos.cols() % 2 == 0) {
    throw InvalidBoundaryError("r_cos must have shape (m_max+1, 2 n_max+1)");
  }
  if (b.z_sin.rows() != b.r_cos.rows() || b.z_sin.cols() != b.r_cos.cols()) {
    throw InvalidBoundaryError("r_cos and z_sin shapes differ");
  }
  for (Eigen::Index i = 0; i < b.r_cos.size(); ++i) {
    if (!isfinite(b.r_cos.data()[i]) || !isfinite(b.z_sin.data()[i])) {
      throw InvalidBoundaryError("non-finite boundary coefficient");
    }
  }
  if (!(b.r(0, 0) > Scalar(0))) {
    throw InvalidBoundaryError("R_00 must be positive");
  }
  if (b.stellarator_symmetric) {
    for (int n = -b.n_max(); n <= 0; ++n) {
      if (n < 0 && b.r(0, n) != Scalar(0)) {
        throw InvalidBoundaryError("stellarator symmetry requires R_0n = 0 for n < 0");
      }
      if (b.z(0, n) != Scalar(0)) {
        throw InvalidBoundaryError("stellarator symmetry requires Z_0n = 0 for n <= 0");
      }
    }
  }
}

struct SurfaceSample {
  double theta = 0;
  double phi = 0;
  double r = 0;
  double phi_cyl = 0;
  double z = 0;
};

// Surface positions on a tensor grid: entry (i, j) is at (theta_i, phi_j).
template <typename Scalar>
struct SurfaceGridT {
  VectorX<Scalar> theta;
  VectorX<Scalar> phi;
  MatrixX<Scalar> r;
  MatrixX<Scalar> z;

  SurfaceSample at(Eigen::Index i, Eigen::Index j) const {
    return {double(theta(i)), double(phi(j)), double(r(i, j)), double(phi(j)),
            double(z(i, j))};
  }
};

using SurfaceGrid = SurfaceGridT<double>;

namespace detail {

// Poloidal harmonics at a fixed toroidal angle:
//   R(theta) = sum_m a_m cos(m theta) + b_m sin(m theta)
//   Z(theta) = sum_m c_m sin(m theta) - d_m cos(m theta)
template <typename Scalar>
struct PoloidalHarmonics {
  VectorX<Scalar> a, b, c, d;
};

template <typename Scalar>
PoloidalHarmonics<Scalar> poloidal_harmonics(const PlasmaBoundaryT<Scalar>& bd,
                                             Scalar phi) {
  using std::cos;
  using std::sin;
  const int mm = bd.m_max();
  const int nn = bd.n_max();
  PoloidalHarmonics<Scalar> h{VectorX<Scalar>::Zero(mm + 1), VectorX<Scalar>::Zero(mm + 1),
                              VectorX<Scalar>::Zero(mm + 1), VectorX<Scalar>::Zero(mm + 1)};
  for (int n = -nn; n <= nn; ++n) {
    const Scalar zeta = Scalar(n * bd.n_field_periods) * phi;
    const Scalar cn = cos(zeta);
    const Scalar sn = sin(zeta);
    for (int m = 0; m <= mm; ++m) {
      const Scalar rmn = bd.r(m, n);
      const Scalar zmn = bd.z(m, n);
      h.a(m) += rmn * cn;
      h.b(m) += rmn * sn;
      h.c(m) += zmn * cn;
      h.d(m) += zmn * sn;
    }
  }
  return h;
}

}  // namespace detail

// Values and poloidal derivatives of one cross-section on a theta grid.
template <typename Scalar>
struct SectionSamples {
  VectorX<Scalar> r, z, r_theta, z_theta, r_theta2, z_theta2;
};

template <typename Scalar>
SectionSamples<Scalar> sample_section(const PlasmaBoundaryT<Scalar>& bd, Scalar phi,
                                      std::span<const Scalar> thetas) {
  using std::cos;
  using std::sin;
  const auto h = detail::poloidal_harmonics(bd, phi);
  const auto n = static_cast<Eigen::Index>(thetas.size());
  SectionSamples<Scalar> s{VectorX<Scalar>::Zero(n), VectorX<Scalar>::Zero(n),
                           VectorX<Scalar>::Zero(n), VectorX<Scalar>::Zero(n),
                           VectorX<Scalar>::Zero(n), VectorX<Scalar>::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar t = thetas[static_cast<std::size_t>(i)];
    for (int m = 0; m <= bd.m_max(); ++m) {
      const Scalar cm = cos(Scalar(m) * t);
      const Scalar sm = sin(Scalar(m) * t);
      const Scalar mf = Scalar(m);
      s.r(i) += h.a(m) * cm + h.b(m) * sm;
      s.z(i) += h.c(m) * sm - h.d(m) * cm;
      s.r_theta(i) += mf * (-h.a(m) * sm + h.b(m) * cm);
      s.z_theta(i) += mf * (h.c(m) * cm + h.d(m) * sm);
      s.r_theta2(i) += -mf * mf * (h.a(m) * cm + h.b(m) * sm);
      s.z_theta2(i) += -mf * mf * (h.c(m) * sm - h.d(m) * cm);
    }
  }
  return s;
}

template <typename Scalar>
SurfaceGridT<Scalar> evaluate_surface(const PlasmaBoundaryT<Scalar>& bd,
                                      std::span<const Scalar> theta_grid,
                                      std::span<const Scalar> phi_grid) {
  using std::isfinite;
  validate(bd);
  if (theta_grid.empty() || phi_grid.empty()) {
    throw ShapeError("evaluate_surface needs non-empty angle grids");
  }
  for (Scalar t : theta_grid) {
    if (!isfinite(t)) throw DomainError("non-finite theta");
  }
  for (Scalar p : phi_grid) {
    if (!isfinite(p)) throw DomainError("non-finite phi");
  }
  SurfaceGridT<Scalar> g;
  g.theta = Eigen::Map<const VectorX<Scalar>>(theta_grid.data(), theta_grid.size());
  g.phi = Eigen::Map<const VectorX<Scalar>>(phi_grid.data(), phi_grid.size());
  g.r.resize(g.theta.size(), g.phi.size());
  g.z.resize(g.theta.size(), g.phi.size());
  for (Eigen::Index j = 0; j < g.phi.size(); ++j) {
    const auto s = sample_section(bd, g.phi(j), theta_grid);
    g.r.col(j) = s.r;
    g.z.col(j) = s.z;
  }
  return g;
}

// Uniform endpoint-excluded grid on [start, start + length).
template <typename Scalar = double>
std::vector<Scalar> uniform_grid(int n, Scalar length, Scalar start = Scalar(0)) {
  std::vector<Scalar> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = start + length * Scalar(i) / Scalar(n);
  return g;
}

// One free coefficient in the flattened design vector.
struct FreeMode {
  bool is_z = false;
  int m = 0;
  int n = 0;
};

// Free modes in flatten order: R block before Z block, m-major, n ascending.
// R_00 and the symmetry-constrained m = 0 entries are excluded.
inline std::vector<FreeMode> free_modes(const BoundaryLayout& layout) {
  std::vector<FreeMode> modes;
  for (int block = 0; block < 2; ++block) {
    const bool is_z = block == 1;
    for (int m = 0; m <= layout.m_max; ++m) {
      for (int n = -layout.n_max; n <= layout.n_max; ++n) {
        if (m == 0) {
          if (!is_z && n == 0) continue;
          if (layout.stellarator_symmetric && (is_z ? n <= 0 : n < 0)) continue;
          // Without symmetry the redundant cos(-n zeta) duplicates are still
          // carried so every stored coefficient is addressable.
        }
        modes.push_back({is_z, m, n});
      }
    }
  }
  return modes;
}

inline Eigen::Index free_parameter_count(const BoundaryLayout& layout) {
  return static_cast<Eigen::Index>(free_modes(layout).size());
}

template <typename Scalar>
VectorX<Scalar> flatten(const PlasmaBoundaryT<Scalar>& bd) {
  const auto modes = free_modes(layout_of(bd));
  VectorX<Scalar> theta(static_cast<Eigen::Index>(modes.size()));
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto& md = modes[i];
    theta(static_cast<Eigen::Index>(i)) = md.is_z ? bd.z(md.m, md.n) : bd.r(md.m, md.n);
  }
  return theta;
}

template <typename Derived>
PlasmaBoundaryT<typename Derived::Scalar> unflatten(
    const Eigen::MatrixBase<Derived>& theta, const BoundaryLayout& layout,
    typename Derived::Scalar major_radius = typename Derived::Scalar(1)) {
  using Scalar = typename Derived::Scalar;
  const auto modes = free_modes(layout);
  if (theta.size() != static_cast<Eigen::Index>(modes.size())) {
    throw ShapeError("design vector has length " + std::to_string(theta.size()) +
                     ", layout expects " + std::to_string(modes.size()));
  }
  auto bd = make_boundary<Scalar>(layout, major_radius);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto& md = modes[i];
    (md.is_z ? bd.z(md.m, md.n) : bd.r(md.m, md.n)) = theta(static_cast<Eigen::Index>(i));
  }
  return bd;
}

// Copies coefficients into a (possibly larger or smaller) layout; modes
// outside the target layout are dropped.
template <typename Scalar>
PlasmaBoundaryT<Scalar> resize_modes(const PlasmaBoundaryT<Scalar>& bd, int m_max, int n_max) {
  BoundaryLayout layout = layout_of(bd);
  layout.m_max = m_max;
  layout.n_max = n_max;
  auto out = make_boundary<Scalar>(layout, bd.major_radius());
  for (int m = 0; m <= std::min(m_max, bd.m_max()); ++m) {
    for (int n = -std::min(n_max, bd.n_max()); n <= std::min(n_max, bd.n_max()); ++n) {
      out.r(m, n) = bd.r(m, n);
      out.z(m, n) = bd.z(m, n);
    }
  }
  return out;
}

// Elliptical cross-section of axis ratio `elongation` whose major axis turns
// by pi per field period, built from two counter-rotating circles:
//   R - 1 = r0 cos(theta) + r1 cos(theta - N_fp phi)
//   Z     = r0 sin(theta) - r1 sin(theta - N_fp phi)
// The semi-axes are r0 + r1 and r0 - r1, so the area-equivalent minor radius
// is sqrt(r0^2 - r1^2) = 1 / aspect. `torsion` adds a helical excursion of
// the section centre, R_{0,1} = torsion and Z_{0,1} = -torsion.
template <typename Scalar = double>
PlasmaBoundaryT<Scalar> make_rotating_ellipse(int n_fp, Scalar aspect, Scalar elongation,
                                              Scalar torsion, int m_max = 4, int n_max = 4) {
  using std::sqrt;
  if (!(aspect > Scalar(1))) throw DomainError("rotating ellipse needs aspect > 1");
  if (!(elongation >= Scalar(1))) throw DomainError("rotating ellipse needs elongation >= 1");
  if (n_fp < 1) throw DomainError("rotating ellipse needs n_fp >= 1");
  if (m_max < 1 || n_max < 1) throw DomainError("rotating ellipse needs m_max, n_max >= 1");
  auto bd = make_boundary<Scalar>({n_fp, m_max, n_max, true});
  const Scalar minor = Scalar(1) / aspect;
  const Scalar q = (elongation - Scalar(1)) / (elongation + Scalar(1));
  const Scalar r0 = minor / sqrt(Scalar(1) - q * q);
  const Scalar r1 = q * r0;
  bd.r(1, 0) = r0;
  bd.z(1, 0) = r0;
  bd.r(1, 1) = r1;
  bd.z(1, 1) = -r1;
  bd.r(0, 1) = torsion;
  bd.z(0, 1) = -torsion;
  return bd;
}

}  // namespace stellbench

#endif  // STELLBENCH_BOUNDARY_HPP
