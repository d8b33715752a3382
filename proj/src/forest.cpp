#include "stellbench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stellbench/errors.hpp"

namespace stellbench {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double gini(double positives, double total) {
  if (total <= 0.0) return 0.0;
  const double p = positives / total;
  return 2.0 * p * (1.0 - p);
}

struct Builder {
  const Eigen::MatrixXd& x;
  const std::vector<int>& labels;
  const ForestOptions& options;
  int max_features;
  std::mt19937_64 rng;
  std::vector<TreeNode> nodes;

  int build(std::vector<int>& rows, int begin, int end, int depth) {
    const int n = end - begin;
    double positives = 0.0;
    for (int i = begin; i < end; ++i) positives += labels[rows[i]];
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[id].probability = positives / n;
    const bool pure = positives == 0.0 || positives == n;
    const bool depth_limited = options.max_depth > 0 && depth >= options.max_depth;
    if (pure || depth_limited || n < 2 * options.min_leaf) return id;

    std::vector<int> features(x.cols());
    std::iota(features.begin(), features.end(), 0);
    // Partial Fisher-Yates: the first max_features entries are the subset.
    for (int k = 0; k < max_features; ++k) {
      std::uniform_int_distribution<int> pick(k, int(features.size()) - 1);
      std::swap(features[k], features[pick(rng)]);
    }

    const double parent = gini(positives, n);
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> column(n);
    for (int k = 0; k < max_features; ++k) {
      const int f = features[k];
      for (int i = 0; i < n; ++i) column[i] = {x(rows[begin + i], f), labels[rows[begin + i]]};
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (int i = 0; i < n - 1; ++i) {
        left_pos += column[i].second;
        const int left_n = i + 1;
        const int right_n = n - left_n;
        if (column[i].first == column[i + 1].first) continue;
        if (left_n < options.min_leaf || right_n < options.min_leaf) continue;
        const double child = (left_n * gini(left_pos, left_n) + right_n * gini(positives - left_pos, right_n)) / n;
        const double gain = parent - child;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    const auto mid = std::stable_partition(rows.begin() + begin, rows.begin() + end,
                                           [&](int r) { return x(r, best_feature) <= best_threshold; });
    const int split = static_cast<int>(mid - rows.begin());
    nodes[id].feature = best_feature;
    nodes[id].threshold = best_threshold;
    const int left = build(rows, begin, split, depth + 1);
    const int right = build(rows, split, end, depth + 1);
    nodes[id].left = left;
    nodes[id].right = right;
    return id;
  }
};

}  // namespace

double DecisionTree::predict(const Eigen::VectorXd& x) const {
  if (nodes.empty()) throw ShapeError("empty decision tree");
  int id = 0;
  while (nodes[id].feature >= 0) {
    const auto& node = nodes[id];
    if (node.feature >= x.size()) throw ShapeError("feature index out of range");
    id = x(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes[id].probability;
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[id].feature >= 0) {
      stack.push_back({nodes[id].left, d + 1});
      stack.push_back({nodes[id].right, d + 1});
    }
  }
  return deepest;
}

DecisionTree grow_tree(const Eigen::MatrixXd& x, const std::vector<int>& labels, const std::vector<int>& rows,
                       const ForestOptions& options, std::uint64_t seed) {
  if (rows.empty()) throw ShapeError("cannot grow a tree on zero samples");
  const int d = static_cast<int>(x.cols());
  if (d < 1) throw ShapeError("cannot grow a tree on zero features");
  int max_features = options.max_features > 0 ? options.max_features
                                              : static_cast<int>(std::floor(std::sqrt(double(d))));
  max_features = std::clamp(max_features, 1, d);
  Builder b{x, labels, options, max_features, std::mt19937_64(seed), {}};
  std::vector<int> work = rows;
  b.build(work, 0, static_cast<int>(work.size()), 0);
  return {std::move(b.nodes)};
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, std::vector<std::uint64_t> seeds)
    : trees_(std::move(trees)), seeds_(std::move(seeds)) {
  if (!seeds_.empty() && seeds_.size() != trees_.size()) throw ShapeError("one seed per tree expected");
}

RandomForest RandomForest::train(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 const ForestOptions& options, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (labels.size() != n) throw ShapeError("label count does not match sample count");
  if (n == 0) throw ShapeError("no training samples");
  if (options.n_trees < 1 || options.min_leaf < 1) throw ConfigurationError("forest needs n_trees >= 1, min_leaf >= 1");
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DomainError("labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  if (positives == 0 || positives == n) throw DegenerateLabelsError("training labels contain a single class");

  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> seeds;
  trees.reserve(static_cast<std::size_t>(options.n_trees));
  for (int t = 0; t < options.n_trees; ++t) {
    const std::uint64_t tree_seed = mix(mix(seed) + static_cast<std::uint64_t>(t));
    std::mt19937_64 rng(tree_seed);
    std::vector<int> rows(n);
    if (options.bootstrap) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees.push_back(grow_tree(x, labels, rows, options, rng()));
    seeds.push_back(tree_seed);
  }
  return RandomForest(std::move(trees), std::move(seeds));
}

double RandomForest::predict_proba(const Eigen::VectorXd& x) const {
  if (trees_.empty()) throw ShapeError("empty forest");
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / double(trees_.size());
}

Eigen::VectorXd RandomForest::predict_proba_rows(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd p(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) p(i) = predict_proba(x.row(i).transpose());
  return p;
}

nlohmann::json forest_to_json(const RandomForest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees()) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   probability = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      probability.push_back(n.probability);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                     {"probability", probability}});
  }
  return {{"trees", trees}, {"seeds", f.tree_seeds()}};
}

RandomForest forest_from_json(const nlohmann::json& j) {
  std::vector<DecisionTree> trees;
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<int>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<int>>();
    const auto right = t.at("right").get<std::vector<int>>();
    const auto probability = t.at("probability").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || probability.size() != n || n == 0)
      throw ShapeError("malformed tree");
    DecisionTree tree;
    for (std::size_t i = 0; i < n; ++i) {
      const int l = left[i], r = right[i];
      if (feature[i] >= 0 && (l <= int(i) || r <= int(i) || l >= int(n) || r >= int(n)))
        throw ShapeError("malformed tree links");
      tree.nodes.push_back({feature[i], threshold[i], l, r, probability[i]});
    }
    trees.push_back(std::move(tree));
  }
  return RandomForest(std::move(trees), j.value("seeds", std::vector<std::uint64_t>{}));
}

}  // namespace stellbench
