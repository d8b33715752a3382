#include "stellbench/pca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stellbench/errors.hpp"

namespace stellbench {

namespace {

struct Decomposition {
  Eigen::VectorXd mean;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd v;
  Eigen::Index rank = 0;
};

Decomposition decompose(const Eigen::MatrixXd& data) {
  if (data.rows() < 2 || data.cols() < 1) throw ShapeError("PCA needs at least two samples");
  if (!data.allFinite()) throw DomainError("PCA input contains non-finite values");
  Decomposition d;
  d.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centred = data.rowwise() - d.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  d.singular_values = svd.singularValues();
  d.v = svd.matrixV();
  const double s0 = d.singular_values.size() ? d.singular_values(0) : 0.0;
  const double tol = s0 * double(std::max(data.rows(), data.cols())) * std::numeric_limits<double>::epsilon();
  d.rank = (d.singular_values.array() > tol).count();
  return d;
}

LatentMap truncate(const Decomposition& dec, Eigen::Index d) {
  LatentMap m;
  m.mean = dec.mean;
  m.directions = dec.v.leftCols(d);
  const Eigen::ArrayXd var = dec.singular_values.array().square();
  const double total = var.sum();
  m.explained_variance_ratio = total > 0.0 ? Eigen::VectorXd(var.head(d) / total) : Eigen::VectorXd::Zero(d);
  return m;
}

}  // namespace

Eigen::VectorXd LatentMap::project(const Eigen::VectorXd& x) const {
  if (x.size() != ambient_dim()) throw ShapeError("PCA projection dimension mismatch");
  return directions.transpose() * (x - mean);
}

Eigen::MatrixXd LatentMap::project_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != ambient_dim()) throw ShapeError("PCA projection dimension mismatch");
  return (x.rowwise() - mean.transpose()) * directions;
}

Eigen::VectorXd LatentMap::reconstruct(const Eigen::VectorXd& z) const {
  if (z.size() != dim()) throw ShapeError("PCA latent dimension mismatch");
  return mean + directions * z;
}

Eigen::MatrixXd LatentMap::reconstruct_rows(const Eigen::MatrixXd& z) const {
  if (z.cols() != dim()) throw ShapeError("PCA latent dimension mismatch");
  return (z * directions.transpose()).rowwise() + mean.transpose();
}

LatentMap fit_pca(const Eigen::MatrixXd& data, Eigen::Index d) {
  if (d < 1) throw ShapeError("latent dimension must be >= 1");
  if (data.rows() < d + 1) throw ShapeError("PCA needs at least d + 1 samples");
  if (d > data.cols()) throw RankError("latent dimension exceeds ambient dimension");
  const Decomposition dec = decompose(data);
  if (d > dec.rank)
    throw RankError("requested " + std::to_string(d) + " directions but data rank is " + std::to_string(dec.rank));
  return truncate(dec, d);
}

LatentMap fit_pca_variance(const Eigen::MatrixXd& data, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("variance threshold must be in (0, 1]");
  const Decomposition dec = decompose(data);
  if (dec.rank == 0) throw RankError("data has zero variance");
  const Eigen::ArrayXd var = dec.singular_values.array().square();
  const double total = var.sum();
  double cumulative = 0.0;
  Eigen::Index d = 0;
  while (d < dec.rank) {
    cumulative += var(d) / total;
    ++d;
    if (cumulative >= threshold * (1.0 - 1e-12)) break;
  }
  return truncate(dec, d);
}

nlohmann::json latent_map_to_json(const LatentMap& m) {
  nlohmann::json dirs = nlohmann::json::array();
  for (Eigen::Index j = 0; j < m.directions.cols(); ++j)
    dirs.push_back(std::vector<double>(m.directions.col(j).data(), m.directions.col(j).data() + m.directions.rows()));
  return {{"mean", std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size())},
          {"directions", dirs},
          {"explained_variance_ratio",
           std::vector<double>(m.explained_variance_ratio.data(),
                               m.explained_variance_ratio.data() + m.explained_variance_ratio.size())}};
}

LatentMap latent_map_from_json(const nlohmann::json& j) {
  LatentMap m;
  const auto mean = j.at("mean").get<std::vector<double>>();
  m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), Eigen::Index(mean.size()));
  const auto& dirs = j.at("directions");
  m.directions.resize(m.mean.size(), Eigen::Index(dirs.size()));
  for (std::size_t c = 0; c < dirs.size(); ++c) {
    const auto col = dirs[c].get<std::vector<double>>();
    if (Eigen::Index(col.size()) != m.mean.size()) throw ShapeError("PCA direction length mismatch");
    m.directions.col(Eigen::Index(c)) = Eigen::Map<const Eigen::VectorXd>(col.data(), Eigen::Index(col.size()));
  }
  const auto ratios = j.at("explained_variance_ratio").get<std::vector<double>>();
  m.explained_variance_ratio = Eigen::Map<const Eigen::VectorXd>(ratios.data(), Eigen::Index(ratios.size()));
  if (m.explained_variance_ratio.size() != m.directions.cols()) throw ShapeError("PCA ratio length mismatch");
  return m;
}

}  // namespace stellbench
