#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "innosurv/features.hpp"
#include "innosurv/rng.hpp"

namespace innosurv {

enum class SplitCriterion { gini, entropy };

struct TreeParams {
  // A node is split only when it holds more than min_node_size rows.
  std::size_t min_node_size = 20;
  std::size_t min_leaf_size = 7;
  std::size_t max_depth = 30;
  // Minimum impurity decrease, as a fraction of the root's total impurity mass.
  double cp = 1e-4;
};

struct CtreeParams {
  double alpha = 0.05;
  std::size_t permutations = 999;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;              // numeric: x <= threshold goes left
  std::vector<std::uint8_t> left_levels;  // categorical: 1 where the level goes left
  int left = -1;
  int right = -1;
  double probability = 0.0;  // class-1 frequency among the node's training rows
  std::size_t n = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> raw) const;
  std::size_t leaf_count() const;
};

double impurity(SplitCriterion criterion, double positives, double n);

struct SplitCandidate {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  std::vector<std::uint8_t> left_levels;
  // n * I(parent) - nL * I(left) - nR * I(right)
  double decrease = 0.0;
};

// Best binary split of `rows` on one feature. Numeric thresholds are midpoints
// between consecutive distinct values, ties going to the smaller threshold;
// categorical subsets come from ordering the levels by class-1 proportion.
SplitCandidate best_split(const Matrix& raw, std::span<const int> y, std::span<const std::size_t> rows,
                          std::size_t feature, const FeatureInfo& info, SplitCriterion criterion,
                          std::size_t min_leaf_size);

// Greedy top-down recursive partitioning (Gini for CART, entropy for TREE).
DecisionTree grow_tree(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                       SplitCriterion criterion, const TreeParams& params);
DecisionTree grow_tree(const Matrix& raw, std::span<const int> y, std::span<const std::size_t> rows,
                       const FeatureSchema& schema, SplitCriterion criterion, const TreeParams& params);

// Label association used by the conditional-inference tree: absolute
// difference of class-conditional means for numeric features, Pearson
// chi-square of the level-by-class table for categorical ones.
double association_statistic(std::span<const double> values, std::span<const int> y, const FeatureInfo& info);

struct PermutationTest {
  double statistic = 0.0;
  double p_value = 1.0;  // (1 + #{T_perm >= T_obs}) / (B + 1)
};

PermutationTest permutation_test(std::span<const double> values, std::span<const int> y, const FeatureInfo& info,
                                 std::size_t permutations, Rng& rng);

// At each node, the feature with the smallest permutation p-value is split
// (by Gini) only if its Bonferroni-adjusted p-value is below alpha.
DecisionTree grow_ctree(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                        const TreeParams& params, const CtreeParams& ctree, std::uint64_t seed);

struct BagParams {
  std::size_t members = 50;
  // Fully grown member trees.
  TreeParams tree{1, 1, 30, 0.0};
  // Test hook: every member sees the training rows as-is.
  bool identity_bootstrap = false;
};

// Bootstrap sample (with replacement, size n) for one ensemble member.
std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t member);

struct BaggedTrees {
  std::vector<DecisionTree> members;

  double predict(std::span<const double> raw) const;
};

BaggedTrees grow_bagging(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                         const BagParams& params, std::uint64_t seed);

}  // namespace innosurv
