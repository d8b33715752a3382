#ifndef STELLBENCH_GMM_HPP
#define STELLBENCH_GMM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "json.hpp"

namespace stellbench {

// Full-covariance Gaussian mixture. Call prepare() after editing members.
struct GaussianMixture {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  // Validates and caches Cholesky factors; throws DegenerateFitError when a
  // covariance is not SPD or the weights are not a simplex.
  void prepare();

  Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }
  int components() const { return static_cast<int>(means.size()); }

  double log_density(const Eigen::VectorXd& x) const;
  // log N(x; mean_c, cov_c), without the weight.
  double component_log_density(int c, const Eigen::VectorXd& x) const;
  // Sum over rows.
  double log_likelihood(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const;

 private:
  std::vector<Eigen::MatrixXd> chol_lower_;
  std::vector<double> log_norm_;
};

struct GmmFitOptions {
  int max_iterations = 500;
  // On the change of mean per-sample log-likelihood.
  double tolerance = 1e-8;
  double regularization = 1e-6;
  int kmeans_iterations = 10;
};

struct GmmFit {
  GaussianMixture model;
  // Total log-likelihood after each EM iteration.
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  bool converged = false;
  double bic = 0.0;
};

// Samples are rows. Throws DegenerateFitError when rows < K (d + 1) or a
// component loses all mass.
GmmFit fit_gmm(const Eigen::MatrixXd& x, int k, std::uint64_t seed, const GmmFitOptions& options = {});

// Fits K = 1..k_max (where supported by the sample count) and keeps the
// lowest BIC.
GmmFit fit_gmm_bic(const Eigen::MatrixXd& x, int k_max, std::uint64_t seed, const GmmFitOptions& options = {});

double gmm_bic(const GaussianMixture& model, const Eigen::MatrixXd& x);

nlohmann::json gmm_to_json(const GaussianMixture& g);
GaussianMixture gmm_from_json(const nlohmann::json& j);

}  // namespace stellbench

#endif  // STELLBENCH_GMM_HPP
