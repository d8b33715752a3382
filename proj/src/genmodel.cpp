#include "stellbench/genmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "stellbench/boundary_io.hpp"
#include "stellbench/errors.hpp"

namespace stellbench {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double min_probability(const Eigen::VectorXd& z, const std::vector<RandomForest>& classifiers) {
  double p = 1.0;
  for (const auto& c : classifiers) p = std::min(p, c.predict_proba(z));
  return p;
}

Eigen::MatrixXd rows_where(const Eigen::MatrixXd& z, const std::vector<bool>& keep) {
  const auto n = std::count(keep.begin(), keep.end(), true);
  Eigen::MatrixXd out(n, z.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    if (keep[std::size_t(i)]) out.row(r++) = z.row(i);
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& z) {
  const Eigen::MatrixXd c = z.rowwise() - z.colwise().mean();
  return c.transpose() * c / double(std::max<Eigen::Index>(1, z.rows() - 1));
}

}  // namespace

bool soft_feasible(const Eigen::VectorXd& z, const std::vector<RandomForest>& classifiers, double tau) {
  for (const auto& c : classifiers)
    if (!(c.predict_proba(z) >= tau)) return false;
  return true;
}

double log_posterior(const Eigen::VectorXd& z, const GaussianMixture& prior,
                     const std::vector<RandomForest>& classifiers) {
  double lp = prior.log_density(z);
  for (const auto& c : classifiers) lp += std::log(std::max(c.predict_proba(z), kClassifierProbabilityFloor));
  return lp;
}

GenerativeModel fit_generative_model(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                     const BoundaryLayout& layout, double major_radius,
                                     const GenModelOptions& options, std::uint64_t seed) {
  if (x.cols() != Eigen::Index(free_parameter_count(layout))) throw ShapeError("training vectors do not match layout");
  if (labels.size() != std::size_t(x.rows())) throw ShapeError("label count does not match sample count");
  if (options.n_classifiers < 1) throw ConfigurationError("need at least one classifier");
  if (!(options.region_threshold > 0.0 && options.region_threshold < 1.0))
    throw ConfigurationError("region threshold must be in (0, 1)");

  GenerativeModel model;
  model.layout = layout;
  model.major_radius = major_radius;
  model.region_threshold = options.region_threshold;
  model.latent = options.latent_dim > 0 ? fit_pca(x, options.latent_dim)
                                        : fit_pca_variance(x, options.variance_threshold);
  const Eigen::MatrixXd z = model.latent.project_rows(x);

  for (int i = 0; i < options.n_classifiers; ++i)
    model.classifiers.push_back(RandomForest::train(z, labels, options.forest, mix(seed + 1000u + std::uint64_t(i))));

  std::vector<bool> in_region(std::size_t(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    in_region[std::size_t(i)] = soft_feasible(z.row(i).transpose(), model.classifiers, options.region_threshold);
  Eigen::MatrixXd region = rows_where(z, in_region);
  std::string source = "soft_region";
  if (region.rows() < z.cols() + 1) {
    std::vector<bool> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) positive[i] = labels[i] == 1;
    region = rows_where(z, positive);
    source = "positive_labels";
  }
  if (region.rows() < z.cols() + 1) throw DegenerateFitError("too few points in the feasible region for a prior");
  GmmFit fit = fit_gmm_bic(region, options.max_components, mix(seed + 2000u), options.gmm);
  model.prior = std::move(fit.model);

  const auto positives = std::count(labels.begin(), labels.end(), 1);
  model.metadata = {{"seed", seed},
                    {"n_train", x.rows()},
                    {"n_feasible", positives},
                    {"latent_dim", z.cols()},
                    {"prior_points", region.rows()},
                    {"prior_source", source},
                    {"gmm_components", model.prior.components()},
                    {"gmm_iterations", fit.iterations},
                    {"n_classifiers", options.n_classifiers},
                    {"n_trees", options.forest.n_trees},
                    {"region_threshold", options.region_threshold}};
  return model;
}

CandidateBatch generate_candidates(const GenerativeModel& model, int count, std::uint64_t seed,
                                   const GenerateOptions& options) {
  if (count < 0) throw DomainError("candidate count must be >= 0");
  if (!(options.confidence > 0.0 && options.confidence <= 1.0)) throw DomainError("confidence must be in (0, 1]");
  if (options.thin < 1) throw DomainError("thinning must be >= 1");
  CandidateBatch batch;
  if (count == 0) return batch;

  int heaviest = 0;
  model.prior.weights.maxCoeff(&heaviest);
  const Eigen::VectorXd init = model.prior.means[std::size_t(heaviest)];
  const Eigen::Index d = init.size();
  const Eigen::MatrixXd initial_cov =
      (2.38 * 2.38 / double(d)) * model.prior.covariances[std::size_t(heaviest)] +
      options.mcmc.adapt_epsilon * Eigen::MatrixXd::Identity(d, d);

  const auto& classifiers = model.classifiers;
  const auto& prior = model.prior;
  AdaptiveMetropolis chain([&](const Eigen::VectorXd& z) { return log_posterior(z, prior, classifiers); }, init, seed,
                           options.mcmc, initial_cov);

  std::unordered_set<std::uint64_t> seen;
  while (int(batch.candidates.size()) < count && batch.steps < options.max_steps) {
    const Eigen::VectorXd z = chain.step();
    ++batch.steps;
    if (batch.steps <= options.mcmc.warmup || batch.steps % options.thin != 0) continue;
    ++batch.examined;
    const double p = min_probability(z, classifiers);
    if (!(p >= options.confidence)) continue;
    ++batch.passed;
    PlasmaBoundary b = unflatten(model.latent.reconstruct(z), model.layout, model.major_radius);
    if (!seen.insert(canonical_hash(b)).second) continue;
    batch.candidates.push_back({std::move(b), z, p, std::nullopt});
  }
  batch.acceptance_rate = chain.state().acceptance_rate();
  batch.log_posterior_trace = chain.state().trace;
  if (batch.candidates.empty()) {
    batch.diagnostics = "no sample reached classifier confidence " + std::to_string(options.confidence) + " in " +
                        std::to_string(batch.steps) + " steps (" + std::to_string(batch.examined) +
                        " examined, acceptance " + std::to_string(batch.acceptance_rate) + ")";
  } else if (int(batch.candidates.size()) < count) {
    batch.diagnostics = "step limit reached with " + std::to_string(batch.candidates.size()) + " of " +
                        std::to_string(count) + " candidates";
  }
  return batch;
}

void validate_candidates(CandidateBatch& batch, const ProblemSpec& spec, Oracle& oracle) {
  for (auto& c : batch.candidates) {
    const EvaluationResult r = evaluate_boundary(c.boundary, spec, oracle);
    c.feasible = !r.failed && r.feasible;
  }
}

nlohmann::json candidate_to_json(const Candidate& c) {
  nlohmann::json j = {{"boundary", boundary_to_json(c.boundary)},
                      {"latent", std::vector<double>(c.latent.data(), c.latent.data() + c.latent.size())},
                      {"probability", c.probability}};
  if (c.feasible) j["feasible"] = *c.feasible;
  return j;
}

std::vector<std::uint8_t> serialize_model(const GenerativeModel& model) {
  nlohmann::json classifiers = nlohmann::json::array();
  for (const auto& c : model.classifiers) classifiers.push_back(forest_to_json(c));
  const nlohmann::json payload = {
      {"latent", latent_map_to_json(model.latent)},
      {"classifiers", classifiers},
      {"prior", gmm_to_json(model.prior)},
      {"region_threshold", model.region_threshold},
      {"layout",
       {{"n_field_periods", model.layout.n_field_periods},
        {"m_max", model.layout.m_max},
        {"n_max", model.layout.n_max},
        {"stellarator_symmetric", model.layout.stellarator_symmetric}}},
      {"major_radius", model.major_radius},
      {"metadata", model.metadata}};
  std::vector<std::uint8_t> out = {'S', 'B', 'G', 'M'};
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t((kModelFormatVersion >> (8 * i)) & 0xffu));
  const auto body = nlohmann::json::to_cbor(payload);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

GenerativeModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || bytes[0] != 'S' || bytes[1] != 'B' || bytes[2] != 'G' || bytes[3] != 'M')
    throw ShapeError("not a generative-model file");
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) version |= std::uint32_t(bytes[std::size_t(4 + i)]) << (8 * i);
  if (version != kModelFormatVersion) throw ShapeError("unsupported model format version " + std::to_string(version));
  try {
    const auto payload = nlohmann::json::from_cbor(bytes.begin() + 8, bytes.end());
    GenerativeModel m;
    m.latent = latent_map_from_json(payload.at("latent"));
    for (const auto& c : payload.at("classifiers")) m.classifiers.push_back(forest_from_json(c));
    m.prior = gmm_from_json(payload.at("prior"));
    m.region_threshold = payload.at("region_threshold").get<double>();
    const auto& l = payload.at("layout");
    m.layout = {l.at("n_field_periods").get<int>(), l.at("m_max").get<int>(), l.at("n_max").get<int>(),
                l.at("stellarator_symmetric").get<bool>()};
    m.major_radius = payload.at("major_radius").get<double>();
    m.metadata = payload.at("metadata");
    if (m.latent.ambient_dim() != Eigen::Index(free_parameter_count(m.layout)) || m.prior.dim() != m.latent.dim())
      throw ShapeError("model parts disagree in dimension");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("corrupt model payload: ") + e.what());
  }
}

void save_model(const GenerativeModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NotFoundError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw NotFoundError("failed writing " + path);
}

GenerativeModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace stellbench
