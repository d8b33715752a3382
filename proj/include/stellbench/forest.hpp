#ifndef STELLBENCH_FOREST_HPP
#define STELLBENCH_FOREST_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "json.hpp"

namespace stellbench {

struct ForestOptions {
  int n_trees = 200;
  int min_leaf = 5;
  // <= 0: unlimited.
  int max_depth = 0;
  // <= 0: max(1, floor(sqrt(d))).
  int max_features = 0;
  bool bootstrap = true;
};

struct TreeNode {
  // -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Fraction of positive training labels reaching this node.
  double probability = 0.0;
};

// CART tree on Gini impurity, x[feature] <= threshold goes left.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  double predict(const Eigen::VectorXd& x) const;
  int depth() const;
};

// Grows one tree. `rows` indexes the (possibly repeated) training samples.
DecisionTree grow_tree(const Eigen::MatrixXd& x, const std::vector<int>& labels, const std::vector<int>& rows,
                       const ForestOptions& options, std::uint64_t seed);

class RandomForest {
 public:
  RandomForest() = default;
  explicit RandomForest(std::vector<DecisionTree> trees, std::vector<std::uint64_t> seeds = {});

  // Samples are rows; labels are 0/1. Throws DegenerateLabelsError when one
  // class is missing.
  static RandomForest train(const Eigen::MatrixXd& x, const std::vector<int>& labels, const ForestOptions& options,
                            std::uint64_t seed);

  // Mean of per-tree leaf frequencies.
  double predict_proba(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_proba_rows(const Eigen::MatrixXd& x) const;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const std::vector<std::uint64_t>& tree_seeds() const { return seeds_; }

 private:
  std::vector<DecisionTree> trees_;
  std::vector<std::uint64_t> seeds_;
};

nlohmann::json forest_to_json(const RandomForest& f);
RandomForest forest_from_json(const nlohmann::json& j);

}  // namespace stellbench

#endif  // STELLBENCH_FOREST_HPP
