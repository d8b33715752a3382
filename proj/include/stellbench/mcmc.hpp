#ifndef STELLBENCH_MCMC_HPP
#define STELLBENCH_MCMC_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace stellbench {

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct McmcOptions {
  // Steps with the initial proposal before adaptation starts.
  int warmup = 200;
  double adapt_epsilon = 1e-6;
  // Initial proposal: initial_scale^2 I unless a covariance is supplied.
  double initial_scale = 0.1;
  // false keeps the initial proposal for the whole run.
  bool adapt = true;
};

struct ChainState {
  Eigen::VectorXd current;
  double log_posterior = 0.0;
  Eigen::MatrixXd proposal_covariance;
  long long accepted = 0;
  long long proposed = 0;
  std::vector<double> trace;

  double acceptance_rate() const { return proposed ? double(accepted) / double(proposed) : 0.0; }
};

// Metropolis acceptance probability min(1, exp(proposed - current)).
double metropolis_acceptance(double current_log_posterior, double proposed_log_posterior);

// Random-walk Metropolis whose Gaussian proposal becomes
// (2.38^2 / d) Cov(history) + epsilon I once the warm-up is over.
class AdaptiveMetropolis {
 public:
  // Throws InitializationError when log_posterior(init) is not finite.
  AdaptiveMetropolis(LogDensity log_posterior, const Eigen::VectorXd& init, std::uint64_t seed,
                     McmcOptions options = {}, std::optional<Eigen::MatrixXd> initial_covariance = std::nullopt);

  const Eigen::VectorXd& step();
  const ChainState& state() const { return state_; }

 private:
  void refresh_proposal();

  LogDensity log_posterior_;
  McmcOptions options_;
  ChainState state_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
  Eigen::MatrixXd proposal_chol_;
  // Running moments of the visited states.
  long long n_history_ = 0;
  Eigen::VectorXd history_mean_;
  Eigen::MatrixXd history_m2_;
};

struct McmcResult {
  // One row per step.
  Eigen::MatrixXd samples;
  ChainState state;
};

McmcResult run_mcmc(const Eigen::VectorXd& init, const LogDensity& log_posterior, int steps, std::uint64_t seed,
                    const McmcOptions& options = {},
                    std::optional<Eigen::MatrixXd> initial_covariance = std::nullopt);

}  // namespace stellbench

#endif  // STELLBENCH_MCMC_HPP
