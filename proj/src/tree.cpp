#include "innosurv/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "innosurv/errors.hpp"

namespace innosurv {

namespace {

// Splits that remove less impurity mass than this are rounding noise.
constexpr double kMinDecrease = 1e-12;

double positive_fraction(std::span<const int> y, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::size_t pos = 0;
  for (std::size_t r : rows) pos += y[r] == 1;
  return static_cast<double>(pos) / static_cast<double>(rows.size());
}

void make_leaf(TreeNode& node, std::span<const int> y, std::span<const std::size_t> rows) {
  node.feature = -1;
  node.n = rows.size();
  node.probability = positive_fraction(y, rows);
}

bool goes_left(const TreeNode& node, double value) {
  if (node.left_levels.empty()) return value <= node.threshold;
  const auto level = static_cast<std::size_t>(value);
  return level < node.left_levels.size() && node.left_levels[level] != 0;
}

void partition(const Matrix& raw, const TreeNode& node, std::span<const std::size_t> rows,
               std::vector<std::size_t>& left, std::vector<std::size_t>& right) {
  for (std::size_t r : rows)
    (goes_left(node, raw(r, static_cast<std::size_t>(node.feature))) ? left : right).push_back(r);
}

struct Frame {
  int node;
  std::vector<std::size_t> rows;
  std::size_t depth;
};

template <typename ChooseSplit>
DecisionTree grow(const Matrix& raw, std::span<const int> y, std::vector<std::size_t> root_rows,
                  const TreeParams& params, ChooseSplit&& choose) {
  if (root_rows.empty()) throw DomainError("cannot grow a tree on zero rows");
  DecisionTree tree;
  tree.nodes.emplace_back();
  std::vector<Frame> stack;
  stack.push_back({0, std::move(root_rows), 0});
  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    const double p = positive_fraction(y, frame.rows);
    const bool pure = p == 0.0 || p == 1.0;
    std::optional<SplitCandidate> split;
    if (!pure && frame.rows.size() > params.min_node_size && frame.depth < params.max_depth)
      split = choose(frame.node, frame.rows);
    if (!split || !split->valid) {
      make_leaf(tree.nodes[frame.node], y, frame.rows);
      continue;
    }
    auto& node = tree.nodes[frame.node];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left_levels = std::move(split->left_levels);
    node.n = frame.rows.size();
    node.probability = p;
    std::vector<std::size_t> left, right;
    partition(raw, node, frame.rows, left, right);
    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    tree.nodes[frame.node].left = li;
    tree.nodes[frame.node].right = li + 1;
    stack.push_back({li + 1, std::move(right), frame.depth + 1});
    stack.push_back({li, std::move(left), frame.depth + 1});
  }
  return tree;
}

// Per-node helper for the conditional-inference permutation tests. Shares one
// set of label permutations across all candidate features.
class NodePermuter {
 public:
  NodePermuter(std::span<const int> y, std::size_t n_features) : y_(y.begin(), y.end()), columns_(n_features) {
    for (int v : y_) n1_ += v == 1;
  }

  void set_numeric(std::size_t j, std::vector<double> values) {
    columns_[j] = {std::move(values), 0, {}};
    for (double v : columns_[j].values) columns_[j].total += v;
  }
  void set_categorical(std::size_t j, std::vector<double> values, std::size_t n_levels) {
    Column col{std::move(values), 0, std::vector<double>(n_levels, 0.0)};
    for (double v : col.values) col.level_totals[static_cast<std::size_t>(v)] += 1.0;
    columns_[j] = std::move(col);
  }

  // Positions of label 1 in the node.
  std::vector<std::size_t> observed_ones() const {
    std::vector<std::size_t> ones;
    for (std::size_t i = 0; i < y_.size(); ++i)
      if (y_[i] == 1) ones.push_back(i);
    return ones;
  }

  double statistic(std::size_t j, std::span<const std::size_t> ones) const {
    const auto& col = columns_[j];
    const double n = static_cast<double>(y_.size());
    const double n1 = static_cast<double>(n1_);
    const double n0 = n - n1;
    if (col.level_totals.empty()) {
      double s1 = 0.0;
      for (std::size_t i : ones) s1 += col.values[i];
      return std::abs(s1 / n1 - (col.total - s1) / n0);
    }
    std::vector<double> o1(col.level_totals.size(), 0.0);
    for (std::size_t i : ones) o1[static_cast<std::size_t>(col.values[i])] += 1.0;
    double chi = 0.0;
    for (std::size_t k = 0; k < o1.size(); ++k) {
      const double nk = col.level_totals[k];
      if (nk == 0.0) continue;
      const double e1 = nk * n1 / n;
      const double e0 = nk * n0 / n;
      const double d1 = o1[k] - e1;
      const double d0 = (nk - o1[k]) - e0;
      chi += d1 * d1 / e1 + d0 * d0 / e0;
    }
    return chi;
  }

  struct Result {
    double statistic = 0.0;
    double p_value = 1.0;
    double z = 0.0;  // standardized against the permutation distribution
  };

  std::vector<Result> run(std::span<const std::size_t> features, std::size_t permutations, Rng& rng) const {
    const auto ones = observed_ones();
    std::vector<Result> out(features.size());
    std::vector<double> sum(features.size(), 0.0), sumsq(features.size(), 0.0);
    std::vector<std::size_t> exceed(features.size(), 0);
    for (std::size_t f = 0; f < features.size(); ++f) out[f].statistic = statistic(features[f], ones);

    std::vector<std::size_t> index(y_.size());
    for (std::size_t b = 0; b < permutations; ++b) {
      std::iota(index.begin(), index.end(), 0);
      // Partial Fisher-Yates: the first n1 slots become the permuted positives.
      for (std::size_t i = 0; i < n1_; ++i) {
        const std::size_t j = i + rng.below(index.size() - i);
        std::swap(index[i], index[j]);
      }
      const std::span<const std::size_t> perm_ones(index.data(), n1_);
      for (std::size_t f = 0; f < features.size(); ++f) {
        const double t = statistic(features[f], perm_ones);
        sum[f] += t;
        sumsq[f] += t * t;
        const double obs = out[f].statistic;
        if (t >= obs - 1e-10 * std::max(1.0, std::abs(obs))) ++exceed[f];
      }
    }
    const double b = static_cast<double>(permutations);
    for (std::size_t f = 0; f < features.size(); ++f) {
      out[f].p_value = (1.0 + static_cast<double>(exceed[f])) / (b + 1.0);
      if (permutations > 1) {
        const double m = sum[f] / b;
        const double var = std::max(0.0, (sumsq[f] - b * m * m) / (b - 1.0));
        out[f].z = var > 0.0 ? (out[f].statistic - m) / std::sqrt(var) : 0.0;
      }
    }
    return out;
  }

 private:
  struct Column {
    std::vector<double> values;
    double total = 0.0;
    std::vector<double> level_totals;  // empty for numeric
  };

  std::vector<int> y_;
  std::vector<Column> columns_;
  std::size_t n1_ = 0;
};

}  // namespace

double DecisionTree::predict(std::span<const double> raw) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& node = nodes[i];
    i = static_cast<std::size_t>(goes_left(node, raw[static_cast<std::size_t>(node.feature)]) ? node.left
                                                                                                : node.right);
  }
  return nodes[i].probability;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

double impurity(SplitCriterion criterion, double positives, double n) {
  if (n <= 0.0) return 0.0;
  const double p = positives / n;
  if (criterion == SplitCriterion::gini) return 2.0 * p * (1.0 - p);
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h;
}

SplitCandidate best_split(const Matrix& raw, std::span<const int> y, std::span<const std::size_t> rows,
                          std::size_t feature, const FeatureInfo& info, SplitCriterion criterion,
                          std::size_t min_leaf_size) {
  SplitCandidate best;
  best.feature = static_cast<int>(feature);
  const double n = static_cast<double>(rows.size());
  double pos = 0.0;
  for (std::size_t r : rows) pos += y[r];
  const double parent = n * impurity(criterion, pos, n);
  const std::size_t min_leaf = std::max<std::size_t>(min_leaf_size, 1);

  auto consider = [&](double nl, double pl, auto&& record) {
    const double nr = n - nl;
    if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) return;
    const double dec = parent - nl * impurity(criterion, pl, nl) - nr * impurity(criterion, pos - pl, nr);
    if (!best.valid || dec > best.decrease) {
      best.valid = true;
      best.decrease = dec;
      record();
    }
  };

  if (info.kind == ColumnKind::numeric) {
    std::vector<std::pair<double, int>> pts;
    pts.reserve(rows.size());
    for (std::size_t r : rows) pts.emplace_back(raw(r, feature), y[r]);
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double nl = 0.0, pl = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      nl += 1.0;
      pl += pts[i].second;
      if (pts[i].first == pts[i + 1].first) continue;
      consider(nl, pl, [&] {
        const double a = pts[i].first, b = pts[i + 1].first;
        double mid = 0.5 * (a + b);
        if (!(mid < b)) mid = a;
        best.threshold = mid;
      });
    }
    return best;
  }

  const std::size_t levels = info.levels.size();
  std::vector<double> count(levels, 0.0), ones(levels, 0.0);
  for (std::size_t r : rows) {
    const auto k = static_cast<std::size_t>(raw(r, feature));
    count[k] += 1.0;
    ones[k] += y[r];
  }
  std::vector<std::size_t> present;
  for (std::size_t k = 0; k < levels; ++k)
    if (count[k] > 0) present.push_back(k);
  std::stable_sort(present.begin(), present.end(),
                   [&](std::size_t a, std::size_t b) { return ones[a] / count[a] < ones[b] / count[b]; });
  double nl = 0.0, pl = 0.0;
  for (std::size_t i = 0; i + 1 < present.size(); ++i) {
    nl += count[present[i]];
    pl += ones[present[i]];
    consider(nl, pl, [&] {
      best.left_levels.assign(levels, 0);
      for (std::size_t t = 0; t <= i; ++t) best.left_levels[present[t]] = 1;
      // Levels absent from the node follow the larger child.
      if (nl >= n - nl)
        for (std::size_t k = 0; k < levels; ++k)
          if (count[k] == 0) best.left_levels[k] = 1;
    });
  }
  return best;
}

DecisionTree grow_tree(const Matrix& raw, std::span<const int> y, std::span<const std::size_t> rows,
                       const FeatureSchema& schema, SplitCriterion criterion, const TreeParams& params) {
  std::vector<std::size_t> root(rows.begin(), rows.end());
  double pos = 0.0;
  for (std::size_t r : root) pos += y[r];
  const double root_mass = static_cast<double>(root.size()) * impurity(criterion, pos, static_cast<double>(root.size()));
  const auto& features = schema.features();
  return grow(raw, y, std::move(root), params, [&](int, const std::vector<std::size_t>& node_rows) {
    SplitCandidate best;
    for (std::size_t f = 0; f < features.size(); ++f) {
      auto cand = best_split(raw, y, node_rows, f, features[f], criterion, params.min_leaf_size);
      if (cand.valid && (!best.valid || cand.decrease > best.decrease)) best = std::move(cand);
    }
    if (best.valid && (best.decrease <= kMinDecrease * static_cast<double>(node_rows.size()) ||
                       best.decrease < params.cp * root_mass))
      best.valid = false;
    return best;
  });
}

DecisionTree grow_tree(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                       SplitCriterion criterion, const TreeParams& params) {
  std::vector<std::size_t> rows(raw.rows);
  std::iota(rows.begin(), rows.end(), 0);
  return grow_tree(raw, y, rows, schema, criterion, params);
}

double association_statistic(std::span<const double> values, std::span<const int> y, const FeatureInfo& info) {
  NodePermuter perm(y, 1);
  std::vector<double> v(values.begin(), values.end());
  if (info.kind == ColumnKind::numeric)
    perm.set_numeric(0, std::move(v));
  else
    perm.set_categorical(0, std::move(v), info.levels.size());
  return perm.statistic(0, perm.observed_ones());
}

PermutationTest permutation_test(std::span<const double> values, std::span<const int> y, const FeatureInfo& info,
                                 std::size_t permutations, Rng& rng) {
  NodePermuter perm(y, 1);
  std::vector<double> v(values.begin(), values.end());
  if (info.kind == ColumnKind::numeric)
    perm.set_numeric(0, std::move(v));
  else
    perm.set_categorical(0, std::move(v), info.levels.size());
  const std::size_t only = 0;
  const auto r = perm.run(std::span<const std::size_t>(&only, 1), permutations, rng);
  return {r[0].statistic, r[0].p_value};
}

DecisionTree grow_ctree(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                        const TreeParams& params, const CtreeParams& ctree, std::uint64_t seed) {
  if (ctree.permutations < 1) throw DomainError("ctree: need at least one permutation");
  std::vector<std::size_t> rows(raw.rows);
  std::iota(rows.begin(), rows.end(), 0);
  const auto& features = schema.features();
  return grow(raw, y, std::move(rows), params, [&](int node_index, const std::vector<std::size_t>& node_rows) {
    std::vector<int> node_y;
    for (std::size_t r : node_rows) node_y.push_back(y[r]);
    NodePermuter perm(node_y, features.size());
    std::vector<std::size_t> candidates;
    for (std::size_t f = 0; f < features.size(); ++f) {
      std::vector<double> v;
      v.reserve(node_rows.size());
      for (std::size_t r : node_rows) v.push_back(raw(r, f));
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      if (*lo == *hi) continue;  // constant in this node
      if (features[f].kind == ColumnKind::numeric)
        perm.set_numeric(f, std::move(v));
      else
        perm.set_categorical(f, std::move(v), features[f].levels.size());
      candidates.push_back(f);
    }
    SplitCandidate none;
    if (candidates.empty()) return none;
    Rng rng(seed, "ctree.node", static_cast<std::uint64_t>(node_index));
    const auto results = perm.run(candidates, ctree.permutations, rng);
    std::size_t pick = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
      if (results[i].p_value < results[pick].p_value ||
          (results[i].p_value == results[pick].p_value && results[i].z > results[pick].z))
        pick = i;
    }
    const double adjusted = std::min(1.0, results[pick].p_value * static_cast<double>(candidates.size()));
    if (!(adjusted < ctree.alpha)) return none;
    const std::size_t f = candidates[pick];
    auto split = best_split(raw, y, node_rows, f, features[f], SplitCriterion::gini, params.min_leaf_size);
    if (split.valid && split.decrease <= kMinDecrease * static_cast<double>(node_rows.size())) split.valid = false;
    return split;
  });
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t member) {
  Rng rng(seed, "bag.bootstrap", member);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = rng.below(n);
  return rows;
}

double BaggedTrees::predict(std::span<const double> raw) const {
  double sum = 0.0;
  for (const auto& tree : members) sum += tree.predict(raw);
  return sum / static_cast<double>(members.size());
}

BaggedTrees grow_bagging(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                         const BagParams& params, std::uint64_t seed) {
  if (params.members < 1) throw DomainError("bagging: need at least one member");
  BaggedTrees out;
  std::vector<std::size_t> identity(raw.rows);
  std::iota(identity.begin(), identity.end(), 0);
  for (std::size_t m = 0; m < params.members; ++m) {
    const auto rows = params.identity_bootstrap ? identity : bootstrap_rows(raw.rows, seed, m);
    out.members.push_back(grow_tree(raw, y, rows, schema, SplitCriterion::gini, params.tree));
  }
  return out;
}

}  // namespace innosurv
