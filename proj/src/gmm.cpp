#include "stellbench/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "stellbench/errors.hpp"

namespace stellbench {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

}  // namespace

void GaussianMixture::prepare() {
  const int k = components();
  if (k < 1) throw DegenerateFitError("mixture has no components");
  if (weights.size() != k || int(covariances.size()) != k) throw ShapeError("mixture parts disagree in count");
  const Eigen::Index d = dim();
  if (d < 1) throw ShapeError("mixture dimension must be >= 1");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    throw DegenerateFitError("mixture weights are not a probability simplex");
  chol_lower_.assign(k, {});
  log_norm_.assign(k, 0.0);
  for (int c = 0; c < k; ++c) {
    if (means[c].size() != d || covariances[c].rows() != d || covariances[c].cols() != d)
      throw ShapeError("mixture component shape mismatch");
    if (!covariances[c].isApprox(covariances[c].transpose(), 1e-12))
      throw DegenerateFitError("covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(covariances[c]);
    if (llt.info() != Eigen::Success) throw DegenerateFitError("covariance is not positive definite");
    chol_lower_[c] = llt.matrixL();
    const double log_det = 2.0 * chol_lower_[c].diagonal().array().log().sum();
    log_norm_[c] = -0.5 * (double(d) * std::log(2.0 * std::numbers::pi) + log_det);
  }
}

double GaussianMixture::component_log_density(int c, const Eigen::VectorXd& x) const {
  if (chol_lower_.size() != means.size()) throw ShapeError("mixture not prepared");
  if (x.size() != dim()) throw ShapeError("mixture dimension mismatch");
  const Eigen::VectorXd u = chol_lower_[c].triangularView<Eigen::Lower>().solve(x - means[c]);
  return log_norm_[c] - 0.5 * u.squaredNorm();
}

double GaussianMixture::log_density(const Eigen::VectorXd& x) const {
  Eigen::VectorXd lp(components());
  for (int c = 0; c < components(); ++c) lp(c) = std::log(weights(c)) + component_log_density(c, x);
  return log_sum_exp(lp);
}

double GaussianMixture::log_likelihood(const Eigen::MatrixXd& x) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) total += log_density(x.row(i).transpose());
  return total;
}

Eigen::VectorXd GaussianMixture::sample(std::mt19937_64& rng) const {
  if (chol_lower_.size() != means.size()) throw ShapeError("mixture not prepared");
  std::discrete_distribution<int> pick(weights.data(), weights.data() + weights.size());
  const int c = pick(rng);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return means[c] + chol_lower_[c] * z;
}

double gmm_bic(const GaussianMixture& model, const Eigen::MatrixXd& x) {
  const double d = double(model.dim());
  const double k = double(model.components());
  const double params = (k - 1.0) + k * d + k * d * (d + 1.0) / 2.0;
  return -2.0 * model.log_likelihood(x) + params * std::log(double(x.rows()));
}

GmmFit fit_gmm(const Eigen::MatrixXd& x, int k, std::uint64_t seed, const GmmFitOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (k < 1) throw DegenerateFitError("component count must be >= 1");
  if (d < 1) throw ShapeError("GMM needs at least one dimension");
  if (n < Eigen::Index(k) * (d + 1))
    throw DegenerateFitError("too few samples (" + std::to_string(n) + ") for " + std::to_string(k) + " components");
  if (!x.allFinite()) throw DomainError("GMM input contains non-finite values");

  const Eigen::MatrixXd reg = options.regularization * Eigen::MatrixXd::Identity(d, d);

  // k-means++ seeding followed by a few Lloyd steps.
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> centres;
  centres.push_back(x.row(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng)).transpose());
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  while (int(centres.size()) < k) {
    for (Eigen::Index i = 0; i < n; ++i)
      nearest(i) = std::min(nearest(i), (x.row(i).transpose() - centres.back()).squaredNorm());
    Eigen::Index next = 0;
    if (nearest.sum() > 0.0) {
      std::discrete_distribution<Eigen::Index> pick(nearest.data(), nearest.data() + n);
      next = pick(rng);
    } else {
      next = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
    centres.push_back(x.row(next).transpose());
  }
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it <= options.kmeans_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dist = (x.row(i).transpose() - centres[c]).squaredNorm();
        if (dist < best) {
          best = dist;
          assign[i] = c;
        }
      }
    }
    if (it == options.kmeans_iterations) break;
    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(d));
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums[assign[i]] += x.row(i).transpose();
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) centres[c] = sums[c] / double(counts[c]);
  }

  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) resp(i, assign[i]) = 1.0;

  GmmFit fit;
  GaussianMixture& g = fit.model;
  auto m_step = [&]() {
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    g.weights = nk / nk.sum();
    g.means.assign(k, Eigen::VectorXd::Zero(d));
    g.covariances.assign(k, reg);
    for (int c = 0; c < k; ++c) {
      if (nk(c) < 1e-10) throw DegenerateFitError("mixture component lost all responsibility");
      g.means[c] = x.transpose() * resp.col(c) / nk(c);
      const Eigen::MatrixXd diff = x.rowwise() - g.means[c].transpose();
      Eigen::MatrixXd cov = (diff.transpose() * resp.col(c).asDiagonal() * diff) / nk(c);
      g.covariances[c] = 0.5 * (cov + cov.transpose()) + reg;
    }
    g.prepare();
  };
  m_step();

  double previous = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd lp(k);
  for (int it = 0; it < options.max_iterations; ++it) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = x.row(i).transpose();
      for (int c = 0; c < k; ++c) lp(c) = std::log(g.weights(c)) + g.component_log_density(c, xi);
      const double l = log_sum_exp(lp);
      resp.row(i) = (lp.array() - l).exp().matrix().transpose();
      total += l;
    }
    fit.log_likelihood_trace.push_back(total);
    fit.iterations = it + 1;
    if (std::abs(total - previous) / double(n) < options.tolerance) {
      fit.converged = true;
      break;
    }
    if (it + 1 == options.max_iterations) break;
    previous = total;
    m_step();
  }
  fit.bic = gmm_bic(g, x);
  return fit;
}

GmmFit fit_gmm_bic(const Eigen::MatrixXd& x, int k_max, std::uint64_t seed, const GmmFitOptions& options) {
  if (k_max < 1) throw DegenerateFitError("k_max must be >= 1");
  std::optional<GmmFit> best;
  std::string last_error = "no component count is supported by the sample size";
  for (int k = 1; k <= k_max; ++k) {
    if (x.rows() < Eigen::Index(k) * (x.cols() + 1)) break;
    try {
      GmmFit fit = fit_gmm(x, k, seed + static_cast<std::uint64_t>(k), options);
      if (!best || fit.bic < best->bic) best = std::move(fit);
    } catch (const DegenerateFitError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw DegenerateFitError(last_error);
  return std::move(*best);
}

nlohmann::json gmm_to_json(const GaussianMixture& g) {
  nlohmann::json means = nlohmann::json::array(), covs = nlohmann::json::array();
  for (const auto& m : g.means) means.push_back(to_vec(m));
  for (const auto& c : g.covariances) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.rows(); ++r) rows.push_back(to_vec(c.row(r).transpose()));
    covs.push_back(rows);
  }
  return {{"weights", to_vec(g.weights)}, {"means", means}, {"covariances", covs}};
}

GaussianMixture gmm_from_json(const nlohmann::json& j) {
  GaussianMixture g;
  g.weights = from_vec(j.at("weights").get<std::vector<double>>());
  for (const auto& m : j.at("means")) g.means.push_back(from_vec(m.get<std::vector<double>>()));
  for (const auto& c : j.at("covariances")) {
    const Eigen::Index d = Eigen::Index(c.size());
    Eigen::MatrixXd cov(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const auto row = c[std::size_t(r)].get<std::vector<double>>();
      if (Eigen::Index(row.size()) != d) throw ShapeError("covariance is not square");
      cov.row(r) = from_vec(row).transpose();
    }
    g.covariances.push_back(cov);
  }
  g.prepare();
  return g;
}

}  // namespace stellbench
