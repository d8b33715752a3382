#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "stellbench/alm.hpp"

namespace stellbench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isnan(v) ? kInf : v; }

}  // namespace

InnerResult DiagonalEvolutionStrategy::minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                                const Eigen::VectorXd& center, double center_value,
                                                double radius, int budget, std::uint64_t seed) {
  InnerResult best{center, sanitize(center_value), 0};
  if (budget <= 0) return best;
  const Eigen::Index n = center.size();
  auto evaluate = [&](const Eigen::VectorXd& x) {
    const double v = sanitize(f(x));
    ++best.evaluations;
    if (v < best.value) {
      best.value = v;
      best.x = x;
    }
    return v;
  };
  if (n == 0 || !(radius > 0.0)) {
    while (best.evaluations < budget) evaluate(center);
    return best;
  }

  const double dn = static_cast<double>(n);
  const int lambda = options_.population > 0 ? options_.population
                                             : 4 + static_cast<int>(std::floor(3.0 * std::log(dn)));
  const int mu = std::max(1, lambda / 2);
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cs = (mueff + 2.0) / (dn + mueff + 5.0);
  const double ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
  const double cc = (4.0 + mueff / dn) / (dn + 4.0 + 2.0 * mueff / dn);
  const double sep = (dn + 2.0) / 3.0;
  const double c1 = std::min(0.9, sep * 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff));
  const double cmu =
      std::min(1.0 - c1, sep * 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dn + 2.0) * (dn + 2.0) + mueff));
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  const Eigen::VectorXd lo = center.array() - radius;
  const Eigen::VectorXd hi = center.array() + radius;
  const double sigma0 = options_.initial_step * radius;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::VectorXd mean = center;
  double sigma = sigma0;
  Eigen::VectorXd cov = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd ps = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd pc = Eigen::VectorXd::Zero(n);
  int generation = 0;

  std::vector<Eigen::VectorXd> steps(lambda, Eigen::VectorXd(n));
  std::vector<double> values(lambda);
  std::vector<int> order(lambda);

  while (best.evaluations < budget) {
    const int batch = std::min(lambda, budget - best.evaluations);
    const Eigen::VectorXd scale = cov.cwiseSqrt();
    for (int i = 0; i < batch; ++i) {
      Eigen::VectorXd z(n);
      for (Eigen::Index d = 0; d < n; ++d) z(d) = normal(rng);
      Eigen::VectorXd x = (mean + sigma * scale.cwiseProduct(z)).cwiseMax(lo).cwiseMin(hi);
      steps[i] = (x - mean) / sigma;
      values[i] = evaluate(x);
    }
    if (batch < lambda) break;
    ++generation;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    int finite = 0;
    while (finite < mu && std::isfinite(values[order[finite]])) ++finite;
    if (finite == 0) {
      sigma *= 0.5;
    } else {
      Eigen::VectorXd w = weights.head(finite) / weights.head(finite).sum();
      Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < finite; ++i) y_w += w(i) * steps[order[i]];
      mean = (mean + sigma * y_w).cwiseMax(lo).cwiseMin(hi);
      if (finite < mu) {
        sigma *= 0.7;
      } else {
        ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * y_w.cwiseQuotient(scale);
        const double ps_norm = ps.norm();
        const double hsig_threshold = (1.4 + 2.0 / (dn + 1.0)) * chi_n;
        const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * generation)) < hsig_threshold;
        pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;
        Eigen::VectorXd rank_mu = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < mu; ++i) rank_mu += weights(i) * steps[order[i]].cwiseAbs2();
        cov = (1.0 - c1 - cmu) * cov + c1 * (pc.cwiseAbs2() + (hsig ? 0.0 : cc * (2.0 - cc)) * cov) + cmu * rank_mu;
        cov = cov.cwiseMax(1e-300);
        sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1.0));
      }
    }
    // Keep the search distribution commensurate with the box.
    const double spread = sigma * cov.cwiseSqrt().maxCoeff();
    if (spread > 2.0 * radius) sigma *= 2.0 * radius / spread;
    if (!(spread >= options_.restart_tolerance * std::max(radius, 1.0))) {
      mean = best.x;
      sigma = sigma0;
      cov.setOnes();
      ps.setZero();
      pc.setZero();
      generation = 0;
    }
  }
  return best;
}

}  // namespace stellbench
