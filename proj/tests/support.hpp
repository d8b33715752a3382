#ifndef STELLBENCH_TESTS_SUPPORT_HPP
#define STELLBENCH_TESTS_SUPPORT_HPP

// Independent reference computations used by the tests. Nothing here calls
// the library's geometry code.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stellbench/boundary.hpp"

namespace stellbench::testing {

inline constexpr double kPi = std::numbers::pi;

// Direct double Fourier sum at one surface point.
inline std::pair<double, double> direct_rz(const PlasmaBoundary& b, double theta, double phi) {
  double r = 0.0;
  double z = 0.0;
  for (int m = 0; m <= b.m_max(); ++m) {
    for (int n = -b.n_max(); n <= b.n_max(); ++n) {
      const double arg = m * theta - n * b.n_field_periods * phi;
      r += b.r_cos(m, n + b.n_max()) * std::cos(arg);
      z += b.z_sin(m, n + b.n_max()) * std::sin(arg);
    }
  }
  return {r, z};
}

// Area, centroid and central second moments of the closed polygon through
// n_points equally spaced theta samples (shoelace formulas).
struct PolygonMoments {
  double area = 0.0;
  double rc = 0.0;
  double zc = 0.0;
  double irr = 0.0;
  double izz = 0.0;
  double irz = 0.0;
  double r_moment = 0.0;

  double elongation() const {
    const double tr = irr + izz;
    const double disc = std::sqrt((irr - izz) * (irr - izz) + 4 * irz * irz);
    return std::sqrt((tr + disc) / (tr - disc));
  }
};

inline std::vector<std::pair<double, double>> polyline(const PlasmaBoundary& b, double phi, int n_points) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) pts.push_back(direct_rz(b, 2 * kPi * i / n_points, phi));
  return pts;
}

inline PolygonMoments polygon_moments(const std::vector<std::pair<double, double>>& pts) {
  double a = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x0, y0] = pts[i];
    const auto [x1, y1] = pts[(i + 1) % n];
    const double c = x0 * y1 - x1 * y0;
    a += c;
    sx += (x0 + x1) * c;
    sy += (y0 + y1) * c;
    sxx += (x0 * x0 + x0 * x1 + x1 * x1) * c;
    syy += (y0 * y0 + y0 * y1 + y1 * y1) * c;
    sxy += (x0 * y1 + 2 * x0 * y0 + 2 * x1 * y1 + x1 * y0) * c;
  }
  const double sign = a > 0 ? 1.0 : -1.0;
  PolygonMoments m;
  m.area = sign * a / 2;
  m.rc = sign * sx / 6 / m.area;
  m.zc = sign * sy / 6 / m.area;
  m.r_moment = m.rc * m.area;
  m.irr = sign * sxx / 12 - m.area * m.rc * m.rc;
  m.izz = sign * syy / 12 - m.area * m.zc * m.zc;
  m.irz = sign * sxy / 24 - m.area * m.rc * m.zc;
  return m;
}

inline PolygonMoments section_moments(const PlasmaBoundary& b, double phi, int n_points = 4096) {
  return polygon_moments(polyline(b, phi, n_points));
}

// Brute-force maximum elongation over n_planes toroidal planes.
inline double brute_max_elongation(const PlasmaBoundary& b, int n_planes = 512, int n_points = 4096) {
  double best = 0.0;
  for (int j = 0; j < n_planes; ++j) {
    const double phi = 2 * kPi / b.n_field_periods * j / n_planes;
    best = std::max(best, section_moments(b, phi, n_points).elongation());
  }
  return best;
}

// R0 / a from polygon areas and Pappus volumes.
inline double brute_aspect_ratio(const PlasmaBoundary& b, int n_planes = 128, int n_points = 4096) {
  double area = 0.0;
  double r_moment = 0.0;
  for (int j = 0; j < n_planes; ++j) {
    const auto m = section_moments(b, 2 * kPi / b.n_field_periods * j / n_planes, n_points);
    area += m.area;
    r_moment += m.r_moment;
  }
  area /= n_planes;
  r_moment /= n_planes;
  const double a2 = area / kPi;
  const double volume = 2 * kPi * r_moment;
  return volume / (2 * kPi * kPi * a2) / std::sqrt(a2);
}

// Triangularity of one plane from a dense polyline; the top point is located
// by a parabola through the three highest samples.
inline double brute_triangularity(const PlasmaBoundary& b, double phi, int n_points = 4096) {
  const auto pts = polyline(b, phi, n_points);
  const auto mom = polygon_moments(pts);
  std::size_t top = 0;
  double r_min = pts[0].first, r_max = pts[0].first;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].second > pts[top].second) top = i;
    r_min = std::min(r_min, pts[i].first);
    r_max = std::max(r_max, pts[i].first);
  }
  const std::size_t n = pts.size();
  const double zm = pts[(top + n - 1) % n].second, z0 = pts[top].second, zp = pts[(top + 1) % n].second;
  const double shift = 0.5 * (zm - zp) / (zm - 2 * z0 + zp);
  const double theta = 2 * kPi * (double(top) + shift) / double(n);
  const double r_top = direct_rz(b, theta, phi).first;
  return (mom.rc - r_top) / ((r_max - r_min) / 2);
}

// Rotating ellipse plus small random shaping in the higher modes.
inline PlasmaBoundary perturbed_ellipse(std::uint64_t seed, double amplitude = 0.01, int n_fp = 3) {
  PlasmaBoundary b = make_rotating_ellipse(n_fp, 6.0, 1.8, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int m = 0; m <= b.m_max(); ++m) {
    for (int n = -b.n_max(); n <= b.n_max(); ++n) {
      if (m == 0 && n <= 0) continue;
      if (m + std::abs(n) < 2) continue;
      const double decay = amplitude / double((m + std::abs(n)) * (m + std::abs(n)));
      b.r(m, n) += decay * u(rng);
      b.z(m, n) += decay * u(rng);
    }
  }
  return b;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("stellbench_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace stellbench::testing

#endif  // STELLBENCH_TESTS_SUPPORT_HPP
