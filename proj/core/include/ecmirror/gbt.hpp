#pragma once

// Second-order gradient-boosted regression trees with squared-error loss and
// the gamma*T + lambda/2*sum(w^2) complexity penalty.

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ecmirror/types.hpp"

namespace ecmirror {

struct GbtHyperparams {
  double learning_rate = 0.1;
  int n_estimators = 50;
  int max_depth = 3;
  double gamma = 0.0;   // minimum gain to take a split
  double lambda = 1.0;  // L2 penalty on leaf weights
  double min_child_weight = 1.0;
  std::optional<double> base_score;  // label mean when unset
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] < threshold
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf output, -G / (H + lambda)

  bool is_leaf() const { return feature < 0; }
};

// Nodes stored in pre-order; nodes[0] is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Features& x) const;
  std::size_t leaf_count() const;
  int depth() const;
};

struct GbtModel {
  GbtHyperparams hyperparams;
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
};

// Throws DomainError on empty data or invalid hyperparameters.
GbtModel gbt_fit(std::span<const TrainingSample> data, const GbtHyperparams& hp);

// base_score + learning_rate * sum of tree outputs.
double gbt_predict(const GbtModel& model, const Features& x);

}  // namespace ecmirror
