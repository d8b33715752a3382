#include "stellbench/mcmc.hpp"

#include <cmath>

#include "stellbench/errors.hpp"

namespace stellbench {

double metropolis_acceptance(double current_log_posterior, double proposed_log_posterior) {
  if (std::isnan(proposed_log_posterior) || proposed_log_posterior == -INFINITY) return 0.0;
  const double diff = proposed_log_posterior - current_log_posterior;
  return diff >= 0.0 ? 1.0 : std::exp(diff);
}

AdaptiveMetropolis::AdaptiveMetropolis(LogDensity log_posterior, const Eigen::VectorXd& init, std::uint64_t seed,
                                       McmcOptions options, std::optional<Eigen::MatrixXd> initial_covariance)
    : log_posterior_(std::move(log_posterior)), options_(options), rng_(seed), uniform_(0.0, 1.0) {
  const Eigen::Index d = init.size();
  if (d < 1) throw InitializationError("chain needs a non-empty initial point");
  state_.current = init;
  state_.log_posterior = log_posterior_(init);
  if (!std::isfinite(state_.log_posterior)) throw InitializationError("initial log-posterior is not finite");
  state_.proposal_covariance = initial_covariance ? *initial_covariance
                                                  : Eigen::MatrixXd(options_.initial_scale * options_.initial_scale *
                                                                    Eigen::MatrixXd::Identity(d, d));
  if (state_.proposal_covariance.rows() != d || state_.proposal_covariance.cols() != d)
    throw ShapeError("proposal covariance shape mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(state_.proposal_covariance);
  if (llt.info() != Eigen::Success) throw InitializationError("initial proposal covariance is not SPD");
  proposal_chol_ = llt.matrixL();
  history_mean_ = init;
  history_m2_ = Eigen::MatrixXd::Zero(d, d);
  n_history_ = 1;
}

void AdaptiveMetropolis::refresh_proposal() {
  const Eigen::Index d = state_.current.size();
  const double sd = 2.38 * 2.38 / double(d);
  const Eigen::MatrixXd cov = history_m2_ / double(n_history_ - 1);
  Eigen::MatrixXd proposal = sd * cov + options_.adapt_epsilon * Eigen::MatrixXd::Identity(d, d);
  proposal = 0.5 * (proposal + proposal.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(proposal);
  if (llt.info() != Eigen::Success) return;
  state_.proposal_covariance = proposal;
  proposal_chol_ = llt.matrixL();
}

const Eigen::VectorXd& AdaptiveMetropolis::step() {
  const Eigen::Index d = state_.current.size();
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = normal_(rng_);
  const Eigen::VectorXd candidate = state_.current + proposal_chol_ * z;
  const double lp = log_posterior_(candidate);
  ++state_.proposed;
  if (uniform_(rng_) < metropolis_acceptance(state_.log_posterior, lp)) {
    state_.current = candidate;
    state_.log_posterior = lp;
    ++state_.accepted;
  }
  state_.trace.push_back(state_.log_posterior);

  ++n_history_;
  const Eigen::VectorXd delta = state_.current - history_mean_;
  history_mean_ += delta / double(n_history_);
  history_m2_ += delta * (state_.current - history_mean_).transpose();
  if (options_.adapt && state_.proposed >= options_.warmup) refresh_proposal();
  return state_.current;
}

McmcResult run_mcmc(const Eigen::VectorXd& init, const LogDensity& log_posterior, int steps, std::uint64_t seed,
                    const McmcOptions& options, std::optional<Eigen::MatrixXd> initial_covariance) {
  if (steps < 1) throw DomainError("MCMC needs at least one step");
  AdaptiveMetropolis chain(log_posterior, init, seed, options, std::move(initial_covariance));
  McmcResult out;
  out.samples.resize(steps, init.size());
  for (int s = 0; s < steps; ++s) out.samples.row(s) = chain.step().transpose();
  out.state = chain.state();
  return out;
}

}  // namespace stellbench
