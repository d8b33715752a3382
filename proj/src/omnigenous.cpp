#include "stellbench/omnigenous.hpp"

#include <algorithm>
#include <cmath>

// Boost 1.74 pchip calls isnan unqualified.
using std::isnan;

#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <numbers>
#include <random>

#include "stellbench/errors.hpp"

namespace stellbench {

namespace {

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

constexpr double kPi = std::numbers::pi;

}  // namespace

MagneticWell MagneticWell::from_knots(std::vector<double> knots) {
  if (knots.size() < 2) throw DomainError("a magnetic well needs at least two knots");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (knots[i] < knots[i - 1]) throw DomainError("well knots must be non-decreasing");
  }
  if (!(knots.front() > 0.0) || !(knots.back() > knots.front())) {
    throw DomainError("well needs b_max > b_min > 0");
  }
  MagneticWell w;
  w.knots = std::move(knots);
  w.b_min = w.knots.front();
  w.b_max = w.knots.back();
  if (w.knots.size() >= 4) {
    std::vector<double> x(w.knots.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = double(i) / double(x.size() - 1);
    auto y = w.knots;
    w.spline_ = std::make_shared<const Pchip>(std::move(x), std::move(y));
  }
  return w;
}

double MagneticWell::operator()(double eta) const {
  // Even, pi-periodic extension: fold eta into [0, pi/2].
  double u = std::fmod(eta + kPi / 2, kPi);
  if (u < 0) u += kPi;
  u = std::abs(u - kPi / 2);
  const double t = std::clamp(u / (kPi / 2), 0.0, 1.0);
  if (spline_) return (*static_cast<const Pchip*>(spline_.get()))(t);
  const double pos = t * double(knots.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), knots.size() - 2);
  const double f = pos - double(i);
  return knots[i] * (1 - f) + knots[i + 1] * f;
}

MorphingCoefficients MorphingCoefficients::zeros(int l_max, int m_max, int n_max) {
  if (l_max < 0 || m_max < 0 || n_max < 0) throw DomainError("morphing mode counts must be >= 0");
  MorphingCoefficients x;
  x.l_max = l_max;
  x.m_max = m_max;
  x.n_max = n_max;
  x.values.assign(static_cast<std::size_t>((l_max + 1) * (m_max + 1) * (2 * n_max + 1)), 0.0);
  return x;
}

double& MorphingCoefficients::at(int l, int m, int n) {
  return values[static_cast<std::size_t>((l * (m_max + 1) + m) * (2 * n_max + 1) + n + n_max)];
}

double MorphingCoefficients::at(int l, int m, int n) const {
  return values[static_cast<std::size_t>((l * (m_max + 1) + m) * (2 * n_max + 1) + n + n_max)];
}

double MorphingCoefficients::shift(double eta, double alpha) const {
  double h = 0.0;
  for (int m = 0; m <= m_max; ++m) {
    const double cm = std::cos(m * eta);
    for (int n = -n_max; n <= n_max; ++n) {
      double coeff = 0.0;
      for (int l = 0; l <= l_max; ++l) coeff += at(l, m, n);  // T_l(1) = 1
      if (coeff == 0.0) continue;
      const double fn = n >= 0 ? std::cos(n * alpha) : std::sin(-n * alpha);
      h += coeff * cm * fn;
    }
  }
  return h;
}

TargetPropertySet sample_target_properties(std::uint64_t seed) {
  using R = TargetSamplingRanges;
  std::mt19937_64 rng(seed);
  auto uniform = [&](SamplingRange r) { return std::uniform_real_distribution<double>(r.min, r.max)(rng); };
  TargetPropertySet p;
  p.n_fp = std::uniform_int_distribution<int>(R::n_fp_min, R::n_fp_max)(rng);
  p.iota_tilde = uniform(R::iota_tilde);
  p.aspect = uniform(R::aspect);
  p.max_elongation = uniform(R::max_elongation);
  p.beta_alpha = uniform(R::beta_alpha);
  p.beta_beta = uniform(R::beta_beta);
  p.mirror_delta = uniform(R::mirror_delta);
  return p;
}

double beta_cdf(double x, double alpha, double beta) {
  if (!(alpha > 0) || !(beta > 0)) throw DomainError("Beta shape parameters must be positive");
  return boost::math::ibeta(alpha, beta, std::clamp(x, 0.0, 1.0));
}

MagneticWell sample_well(double alpha, double beta, double mirror_delta, int n_knots,
                         std::uint64_t seed, double jitter) {
  if (!(alpha > 0) || !(beta > 0)) throw DomainError("Beta shape parameters must be positive");
  if (!(mirror_delta > 0) || !(mirror_delta < 1)) throw DomainError("mirror ratio must lie in (0, 1)");
  if (n_knots < 2) throw DomainError("a magnetic well needs at least two knots");
  if (jitter < 0 || jitter > 1) throw DomainError("knot jitter must lie in [0, 1]");
  // Mean field 1 T: b_min + b_max = 2 and (b_max - b_min) / 2 = mirror_delta.
  const double b_min = 1.0 - mirror_delta;
  const double b_max = 1.0 + mirror_delta;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(-0.5, 0.5);
  std::vector<double> knots(static_cast<std::size_t>(n_knots));
  const double cell = 1.0 / double(n_knots - 1);
  for (int k = 0; k < n_knots; ++k) {
    double t = double(k) * cell;
    if (jitter > 0 && k > 0 && k < n_knots - 1) t += jitter * offset(rng) * cell;
    knots[static_cast<std::size_t>(k)] = b_min + (b_max - b_min) * beta_cdf(t, alpha, beta);
  }
  knots.front() = b_min;
  knots.back() = b_max;
  return MagneticWell::from_knots(std::move(knots));
}

MorphingCoefficients sample_morphing_coefficients(int l_max, int m_max, int n_max, double scale,
                                                  std::uint64_t seed) {
  auto x = MorphingCoefficients::zeros(l_max, m_max, n_max);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int l = 0; l <= l_max; ++l) {
    for (int m = 0; m <= m_max; ++m) {
      for (int n = -n_max; n <= n_max; ++n) {
        const double draw = u(rng);  // drawn for every slot so layouts stay aligned
        x.at(l, m, n) = n >= 0 ? 0.0 : scale * draw;
      }
    }
  }
  return x;
}

Eigen::MatrixXd target_field_strength(const OmnigenousTargetField& field,
                                      const Eigen::VectorXd& eta_grid,
                                      const Eigen::VectorXd& alpha_grid) {
  if (eta_grid.size() == 0 || alpha_grid.size() == 0) throw ShapeError("empty field-line grid");
  Eigen::MatrixXd b(eta_grid.size(), alpha_grid.size());
  for (Eigen::Index i = 0; i < eta_grid.size(); ++i) {
    for (Eigen::Index j = 0; j < alpha_grid.size(); ++j) {
      b(i, j) = field.well(eta_grid(i) + field.x_lmn.shift(eta_grid(i), alpha_grid(j)));
    }
  }
  return b;
}

Eigen::MatrixXd target_on_boozer_grid(const OmnigenousTargetField& field, int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) throw ShapeError("empty Boozer grid");
  Eigen::MatrixXd b(n_theta, n_phi);
  for (int j = 0; j < n_phi; ++j) {
    const double zeta = 2 * kPi * j / n_phi;  // N_fp phi_B
    const double eta = (zeta - kPi) / 2;
    for (int i = 0; i < n_theta; ++i) {
      const double alpha = 2 * kPi * i / n_theta;
      b(i, j) = field.well(eta + field.x_lmn.shift(eta, alpha));
    }
  }
  return b;
}

FieldLineGrid FieldLineGrid::uniform(int n_eta, int n_alpha) {
  if (n_eta < 2 || n_alpha < 1) throw ShapeError("field-line grid too small");
  FieldLineGrid g;
  g.eta = Eigen::VectorXd::LinSpaced(n_eta, -kPi / 2, kPi / 2);
  g.alpha.resize(n_alpha);
  for (int j = 0; j < n_alpha; ++j) g.alpha(j) = 2 * kPi * j / n_alpha;
  return g;
}

double poloidal_weight(double eta, double eta_weight) {
  return (eta_weight + 1) / 2 + (eta_weight - 1) / 2 * std::cos(eta);
}

ResidualResult omnigenity_residual(const Eigen::MatrixXd& b_eq, const OmnigenousTargetField& field,
                                   const FieldLineGrid& grid, double eta_weight) {
  if (b_eq.rows() != grid.eta.size() || b_eq.cols() != grid.alpha.size()) {
    throw ShapeError("equilibrium |B| grid does not match the target evaluation grid");
  }
  const Eigen::MatrixXd target = target_field_strength(field, grid.eta, grid.alpha);
  ResidualResult out;
  out.residuals = b_eq - target;
  for (Eigen::Index i = 0; i < grid.eta.size(); ++i) {
    out.residuals.row(i) *= std::sqrt(poloidal_weight(grid.eta(i), eta_weight));
  }
  out.sum_of_squares = out.residuals.squaredNorm();
  return out;
}

double qi_residual_metric(const Eigen::MatrixXd& boozer_b, const OmnigenousTargetField& field,
                          double eta_weight) {
  if (boozer_b.size() == 0) throw ShapeError("empty Boozer grid");
  const Eigen::MatrixXd target =
      target_on_boozer_grid(field, static_cast<int>(boozer_b.rows()), static_cast<int>(boozer_b.cols()));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < boozer_b.cols(); ++j) {
    const double eta = (2 * kPi * double(j) / double(boozer_b.cols()) - kPi) / 2;
    sum += poloidal_weight(eta, eta_weight) * (boozer_b.col(j) - target.col(j)).squaredNorm();
  }
  // Uniform grid: (1 / 4 pi^2) * integral == grid mean.
  return sum / double(boozer_b.size());
}

nlohmann::json target_field_to_json(const OmnigenousTargetField& field) {
  nlohmann::json x = nlohmann::json::array();
  for (int l = 0; l <= field.x_lmn.l_max; ++l) {
    nlohmann::json ml = nlohmann::json::array();
    for (int m = 0; m <= field.x_lmn.m_max; ++m) {
      nlohmann::json nl = nlohmann::json::array();
      for (int n = -field.x_lmn.n_max; n <= field.x_lmn.n_max; ++n) nl.push_back(field.x_lmn.at(l, m, n));
      ml.push_back(std::move(nl));
    }
    x.push_back(std::move(ml));
  }
  return {{"well_knots", field.well.knots},
          {"b_min", field.well.b_min},
          {"b_max", field.well.b_max},
          {"x_lmn", std::move(x)},
          {"n_field_periods", field.n_field_periods}};
}

OmnigenousTargetField target_field_from_json(const nlohmann::json& j) {
  OmnigenousTargetField f;
  try {
    f.well = MagneticWell::from_knots(j.at("well_knots").get<std::vector<double>>());
    f.n_field_periods = j.at("n_field_periods").get<int>();
    const auto& x = j.at("x_lmn");
    const int l_max = static_cast<int>(x.size()) - 1;
    const int m_max = l_max >= 0 ? static_cast<int>(x[0].size()) - 1 : -1;
    const int n_cols = m_max >= 0 ? static_cast<int>(x[0][0].size()) : 0;
    if (l_max < 0 || m_max < 0 || n_cols % 2 == 0) throw ShapeError("x_lmn must be (L+1, M+1, 2N+1)");
    f.x_lmn = MorphingCoefficients::zeros(l_max, m_max, (n_cols - 1) / 2);
    for (int l = 0; l <= l_max; ++l) {
      for (int m = 0; m <= m_max; ++m) {
        const auto& row = x.at(static_cast<std::size_t>(l)).at(static_cast<std::size_t>(m));
        if (static_cast<int>(row.size()) != n_cols) throw ShapeError("ragged x_lmn");
        for (int k = 0; k < n_cols; ++k) f.x_lmn.at(l, m, k - f.x_lmn.n_max) = row[static_cast<std::size_t>(k)].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("malformed target field: ") + e.what());
  }
  if (j.contains("b_min") && std::abs(j["b_min"].get<double>() - f.well.b_min) > 1e-12) {
    throw DomainError("b_min disagrees with the first well knot");
  }
  if (j.contains("b_max") && std::abs(j["b_max"].get<double>() - f.well.b_max) > 1e-12) {
    throw DomainError("b_max disagrees with the last well knot");
  }
  return f;
}

nlohmann::json target_properties_to_json(const TargetPropertySet& p) {
  return {{"n_fp", p.n_fp},
          {"iota_tilde", p.iota_tilde},
          {"aspect", p.aspect},
          {"max_elongation", p.max_elongation},
          {"beta_alpha", p.beta_alpha},
          {"beta_beta", p.beta_beta},
          {"mirror_delta", p.mirror_delta}};
}

TargetPropertySet target_properties_from_json(const nlohmann::json& j) {
  TargetPropertySet p;
  p.n_fp = j.at("n_fp").get<int>();
  p.iota_tilde = j.at("iota_tilde").get<double>();
  p.aspect = j.at("aspect").get<double>();
  p.max_elongation = j.at("max_elongation").get<double>();
  p.beta_alpha = j.at("beta_alpha").get<double>();
  p.beta_beta = j.at("beta_beta").get<double>();
  p.mirror_delta = j.at("mirror_delta").get<double>();
  return p;
}

}  // namespace stellbench
