#ifndef STELLBENCH_PCA_HPP
#define STELLBENCH_PCA_HPP

#include <Eigen/Dense>

#include "json.hpp"

namespace stellbench {

// Affine map to the top-d principal subspace. Samples are rows.
struct LatentMap {
  Eigen::VectorXd mean;
  // D x d, orthonormal columns.
  Eigen::MatrixXd directions;
  // Fraction of total variance per direction, non-increasing.
  Eigen::VectorXd explained_variance_ratio;

  Eigen::Index dim() const { return directions.cols(); }
  Eigen::Index ambient_dim() const { return directions.rows(); }

  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd project_rows(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd reconstruct_rows(const Eigen::MatrixXd& z) const;
};

// Throws ShapeError with fewer than d + 1 samples, RankError when d exceeds
// the numerical rank of the centred data.
LatentMap fit_pca(const Eigen::MatrixXd& data, Eigen::Index d);

// Smallest d whose cumulative explained variance reaches `threshold`.
LatentMap fit_pca_variance(const Eigen::MatrixXd& data, double threshold);

nlohmann::json latent_map_to_json(const LatentMap& m);
LatentMap latent_map_from_json(const nlohmann::json& j);

}  // namespace stellbench

#endif  // STELLBENCH_PCA_HPP
