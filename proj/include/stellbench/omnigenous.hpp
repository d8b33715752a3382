#ifndef STELLBENCH_OMNIGENOUS_HPP
#define STELLBENCH_OMNIGENOUS_HPP

// Omnigenous target fields: a 1-D magnetic well, symmetric about its minimum
// at eta = 0, morphed across field lines by a computational-coordinate shift
//
//   h(eta, alpha) = sum_{l,m,n} x_lmn T_l(1) cos(m eta) F_n(alpha),
//   F_n(alpha) = cos(n alpha) for n >= 0, sin(|n| alpha) for n < 0,
//
// evaluated on the boundary surface (Chebyshev argument 1, so T_l = 1). The
// target strength is B*(eta, alpha) = well(eta + h(eta, alpha)) with the well
// extended evenly and pi-periodically. Stellarator symmetry keeps only the
// n < 0 (odd) toroidal terms, which makes h odd and B* even under
// (eta, alpha) -> (-eta, -alpha).

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace stellbench {

struct MagneticWell {
  // Field strengths at evenly spaced |eta| in [0, pi/2]; knots.front() is
  // b_min at the well bottom and knots.back() is b_max.
  std::vector<double> knots;
  double b_min = 0.0;
  double b_max = 0.0;

  static MagneticWell from_knots(std::vector<double> knots);

  // Monotone cubic through the knots, even in eta, period pi.
  double operator()(double eta) const;
  double mirror_ratio() const { return (b_max - b_min) / (b_max + b_min); }

 private:
  std::shared_ptr<const void> spline_;
};

struct MorphingCoefficients {
  int l_max = 0;
  int m_max = 0;
  int n_max = 0;
  std::vector<double> values;

  static MorphingCoefficients zeros(int l_max, int m_max, int n_max);
  double& at(int l, int m, int n);
  double at(int l, int m, int n) const;
  // Boundary-surface shift h(eta, alpha).
  double shift(double eta, double alpha) const;
};

struct OmnigenousTargetField {
  MagneticWell well;
  MorphingCoefficients x_lmn;
  int n_field_periods = 1;
};

// Table of uniform sampling ranges for target properties.
struct SamplingRange {
  double min;
  double max;
};

struct TargetSamplingRanges {
  static constexpr int n_fp_min = 1;
  static constexpr int n_fp_max = 5;
  static constexpr SamplingRange iota_tilde{0.1, 0.3};
  static constexpr SamplingRange aspect{4.0, 12.0};
  static constexpr SamplingRange max_elongation{4.0, 7.0};
  static constexpr SamplingRange beta_alpha{2.0, 6.0};
  static constexpr SamplingRange beta_beta{2.0, 6.0};
  static constexpr SamplingRange mirror_delta{0.1, 0.4};
};

struct TargetPropertySet {
  int n_fp = 1;
  double iota_tilde = 0.0;
  double aspect = 0.0;
  double max_elongation = 0.0;
  double beta_alpha = 0.0;
  double beta_beta = 0.0;
  double mirror_delta = 0.0;
};

TargetPropertySet sample_target_properties(std::uint64_t seed);

// Regularised incomplete beta function I_x(alpha, beta).
double beta_cdf(double x, double alpha, double beta);

// Knot k sits at abscissa t_k = k / (n_knots - 1); with jitter > 0 the
// interior abscissae are moved by up to jitter/2 cells (seeded), which keeps
// them ordered. Mean field (b_min + b_max)/2 is 1 T.
MagneticWell sample_well(double alpha, double beta, double mirror_delta, int n_knots,
                         std::uint64_t seed, double jitter = 0.0);

// i.i.d. uniform(-scale, scale) entries; n >= 0 entries are exactly zero.
MorphingCoefficients sample_morphing_coefficients(int l_max, int m_max, int n_max, double scale,
                                                  std::uint64_t seed);

// |B*| on an (eta, alpha) grid: rows eta, columns alpha.
Eigen::MatrixXd target_field_strength(const OmnigenousTargetField& field,
                                      const Eigen::VectorXd& eta_grid,
                                      const Eigen::VectorXd& alpha_grid);

// |B*| on a Boozer grid covering one field period: rows theta_B in [0, 2 pi),
// columns phi_B in [0, 2 pi / N_fp). The grid maps to field-line coordinates
// through eta = (N_fp phi_B - pi) / 2 and alpha = theta_B, which places the
// well maximum at phi_B = 0.
Eigen::MatrixXd target_on_boozer_grid(const OmnigenousTargetField& field, int n_theta, int n_phi);

struct FieldLineGrid {
  Eigen::VectorXd eta;
  Eigen::VectorXd alpha;
  // eta evenly on [-pi/2, pi/2] inclusive, alpha endpoint-excluded on [0, 2 pi).
  static FieldLineGrid uniform(int n_eta = 64, int n_alpha = 33);
};

// w(eta) = (eta_w + 1)/2 + (eta_w - 1)/2 cos(eta).
double poloidal_weight(double eta, double eta_weight);

struct ResidualResult {
  Eigen::MatrixXd residuals;
  double sum_of_squares = 0.0;
};

// r_ij = sqrt(w(eta_i)) (B_eq - B*)_ij.
ResidualResult omnigenity_residual(const Eigen::MatrixXd& b_eq, const OmnigenousTargetField& field,
                                   const FieldLineGrid& grid, double eta_weight = 1.0);

// (1 / 4 pi^2) times the integral of the squared pointwise residual over the
// Boozer angles, i.e. the grid mean of (B - B*)^2 weighted by w(eta).
double qi_residual_metric(const Eigen::MatrixXd& boozer_b, const OmnigenousTargetField& field,
                          double eta_weight = 1.0);

nlohmann::json target_field_to_json(const OmnigenousTargetField& field);
OmnigenousTargetField target_field_from_json(const nlohmann::json& j);
nlohmann::json target_properties_to_json(const TargetPropertySet& p);
TargetPropertySet target_properties_from_json(const nlohmann::json& j);

}  // namespace stellbench

#endif  // STELLBENCH_OMNIGENOUS_HPP
