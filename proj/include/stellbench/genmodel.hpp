#ifndef STELLBENCH_GENMODEL_HPP
#define STELLBENCH_GENMODEL_HPP

// Oracle-free candidate generation: PCA latent space, random-forest
// feasibility classifiers, a mixture prior fitted on the soft feasible
// region, and adaptive Metropolis sampling of the resulting posterior.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stellbench/boundary.hpp"
#include "stellbench/forest.hpp"
#include "stellbench/gmm.hpp"
#include "stellbench/mcmc.hpp"
#include "stellbench/oracle.hpp"
#include "stellbench/pca.hpp"
#include "stellbench/problems.hpp"

namespace stellbench {

inline constexpr double kClassifierProbabilityFloor = 1e-12;

struct GenModelOptions {
  double variance_threshold = 0.95;
  // > 0 overrides the variance threshold.
  int latent_dim = 0;
  int n_classifiers = 1;
  ForestOptions forest;
  double region_threshold = 0.8;
  int max_components = 8;
  GmmFitOptions gmm;
};

struct GenerativeModel {
  LatentMap latent;
  std::vector<RandomForest> classifiers;
  GaussianMixture prior;
  double region_threshold = 0.8;
  BoundaryLayout layout;
  double major_radius = 1.0;
  nlohmann::json metadata = nlohmann::json::object();
};

// Passes iff every classifier's probability is >= tau.
bool soft_feasible(const Eigen::VectorXd& z, const std::vector<RandomForest>& classifiers, double tau);

// log prior(z) + sum_i log max(p_i(z), floor).
double log_posterior(const Eigen::VectorXd& z, const GaussianMixture& prior,
                     const std::vector<RandomForest>& classifiers);

// Rows of x are flattened boundaries in `layout`; labels are 0/1.
GenerativeModel fit_generative_model(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                     const BoundaryLayout& layout, double major_radius,
                                     const GenModelOptions& options, std::uint64_t seed);

struct GenerateOptions {
  double confidence = 0.99;
  // Keep every thin-th post-warm-up state.
  int thin = 10;
  long long max_steps = 200000;
  McmcOptions mcmc;
};

struct Candidate {
  PlasmaBoundary boundary;
  Eigen::VectorXd latent;
  // Smallest probability over the classifiers.
  double probability = 0.0;
  std::optional<bool> feasible;
};

struct CandidateBatch {
  std::vector<Candidate> candidates;
  long long steps = 0;
  long long examined = 0;
  long long passed = 0;
  double acceptance_rate = 0.0;
  std::vector<double> log_posterior_trace;
  std::string diagnostics;
};

CandidateBatch generate_candidates(const GenerativeModel& model, int count, std::uint64_t seed,
                                   const GenerateOptions& options = {});

// Tags each candidate feasible or not with one high-fidelity oracle call.
void validate_candidates(CandidateBatch& batch, const ProblemSpec& spec, Oracle& oracle);

nlohmann::json candidate_to_json(const Candidate& c);

inline constexpr std::uint32_t kModelFormatVersion = 1;
std::vector<std::uint8_t> serialize_model(const GenerativeModel& model);
// Throws ShapeError on a bad magic, version or payload.
GenerativeModel deserialize_model(const std::vector<std::uint8_t>& bytes);
void save_model(const GenerativeModel& model, const std::string& path);
GenerativeModel load_model(const std::string& path);

}  // namespace stellbench

#endif  // STELLBENCH_GENMODEL_HPP
