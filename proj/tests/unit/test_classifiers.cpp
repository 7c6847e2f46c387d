#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "fixtures.hpp"
#include "innosurv/classifier.hpp"
#include "innosurv/errors.hpp"

using namespace innosurv;
using fixtures::categorical;
using fixtures::labelled;
using fixtures::numeric;

namespace {

FeatureSchema numeric_schema(std::size_t k) {
  std::vector<FeatureInfo> f;
  for (std::size_t j = 0; j < k; ++j) f.push_back({"x" + std::to_string(j + 1), ColumnKind::numeric, {}, 0});
  return FeatureSchema(f);
}

Matrix column_matrix(const std::vector<std::vector<double>>& cols) {
  Matrix m(cols[0].size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t r = 0; r < cols[j].size(); ++r) m(r, j) = cols[j][r];
  return m;
}

struct OracleSplit {
  double threshold = 0.0;
  double decrease = -1.0;
};

double gini_mass(double pos, double n) { return n > 0 ? 2.0 * pos * (n - pos) / n : 0.0; }

// Every midpoint between consecutive distinct values, scored from scratch.
OracleSplit exhaustive_gini_split(const std::vector<double>& x, const std::vector<int>& y, std::size_t min_leaf,
                                  double at = NAN) {
  std::vector<double> v = x;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  double pos = 0.0;
  for (int l : y) pos += l;
  const double parent = gini_mass(pos, static_cast<double>(y.size()));
  OracleSplit best;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double t = 0.5 * (v[i] + v[i + 1]);
    double nl = 0, pl = 0;
    for (std::size_t r = 0; r < x.size(); ++r)
      if (x[r] <= t) {
        nl += 1;
        pl += y[r];
      }
    const double nr = static_cast<double>(x.size()) - nl;
    if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) continue;
    const double dec = parent - gini_mass(pl, nl) - gini_mass(pos - pl, nr);
    if (!std::isnan(at) && t == at) return {t, dec};
    if (dec > best.decrease) best = {t, dec};
  }
  return best;
}

Dataset small_synthetic(std::uint64_t seed, std::size_t rows = 600) {
  SyntheticSpec spec;
  spec.n_rows = rows;
  spec.n_numeric = 4;
  spec.n_categorical = 2;
  spec.minority_fraction = 0.3;
  spec.seed = seed;
  return generate_synthetic(spec);
}

ClassifierSpec quick_spec(Algorithm a) {
  ClassifierSpec spec;
  spec.algorithm = a;
  spec.ctree.permutations = 199;
  spec.bag.members = 10;
  spec.ann.epochs = 200;
  return spec;
}

double normal_pdf(double x, double mu, double var) {
  return std::exp(-(x - mu) * (x - mu) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Same dataset with every numeric feature mapped through a * x + b.
Dataset affine(const Dataset& d, double a, double b) {
  std::vector<std::vector<double>> cols;
  for (std::size_t c = 0; c < d.n_cols(); ++c) {
    std::vector<double> col(d.column(c).begin(), d.column(c).end());
    if (d.spec(c).role == ColumnRole::feature && d.spec(c).kind == ColumnKind::numeric)
      for (auto& v : col) v = a * v + b;
    cols.push_back(col);
  }
  return Dataset(d.schema(), cols);
}

}  // namespace

TEST_SUITE("classifiers") {
  TEST_CASE("tree: four points split at 1.5, matching the exhaustive search") {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<int> y{0, 1, 1, 1};
    const auto m = column_matrix({x});
    const std::vector<std::size_t> rows{0, 1, 2, 3};
    const auto cand = best_split(m, y, rows, 0, numeric_schema(1).features()[0], SplitCriterion::gini, 1);
    REQUIRE(cand.valid);
    CHECK(cand.threshold == 1.5);
    CHECK(exhaustive_gini_split(x, y, 1).threshold == 1.5);

    const auto tree = grow_tree(m, y, numeric_schema(1), SplitCriterion::gini, {1, 1, 30, 0.0});
    CHECK(tree.leaf_count() == 2);
    CHECK(tree.predict(std::vector<double>{1.0}) == 0.0);
    CHECK(tree.predict(std::vector<double>{2.0}) == 1.0);
  }

  TEST_CASE("tree: random numeric splits agree with the exhaustive search") {
    Rng rng(31);
    for (int rep = 0; rep < 40; ++rep) {
      const std::size_t n = 10 + rng.below(40);
      std::vector<double> x(n);
      for (auto& v : x) v = static_cast<double>(rng.below(15));
      const auto y = fixtures::two_class_labels(rng, n, 0.4);
      const std::size_t min_leaf = 1 + rng.below(4);
      std::vector<std::size_t> rows(n);
      std::iota(rows.begin(), rows.end(), 0);
      const auto cand = best_split(column_matrix({x}), y, rows, 0, numeric_schema(1).features()[0],
                                   SplitCriterion::gini, min_leaf);
      const auto oracle = exhaustive_gini_split(x, y, min_leaf);
      CHECK(cand.valid == (oracle.decrease >= 0.0));
      if (!cand.valid) continue;
      CHECK(cand.decrease == doctest::Approx(oracle.decrease).epsilon(1e-12));
      // The chosen threshold attains the optimum.
      CHECK(exhaustive_gini_split(x, y, min_leaf, cand.threshold).decrease ==
            doctest::Approx(oracle.decrease).epsilon(1e-12));
    }
  }

  TEST_CASE("tree: pure data and a large minimum node size give a single leaf") {
    const auto pure = labelled({{1, 2, 3, 4, 5}}, {1, 1, 1, 1, 1});
    ClassifierSpec spec;
    spec.tree = {1, 1, 30, 0.0};
    for (auto fit : {fit_cart, fit_tree_deviance}) {
      const auto model = fit(pure, spec);
      CHECK(std::get<DecisionTree>(model.state).leaf_count() == 1);
    }
    const auto mixed = labelled({{1, 2, 3, 4, 5, 6}}, {0, 0, 0, 1, 1, 1});
    spec.tree.min_node_size = 6;
    const auto model = fit_cart(mixed, spec);
    CHECK(std::get<DecisionTree>(model.state).leaf_count() == 1);
    CHECK(predict_proba(model, mixed)[0] == 0.5);
  }

  TEST_CASE("entropy and Gini impurities at hand values") {
    CHECK(impurity(SplitCriterion::gini, 1, 4) == doctest::Approx(0.375));
    CHECK(impurity(SplitCriterion::entropy, 2, 4) == doctest::Approx(std::log(2.0)));
    CHECK(impurity(SplitCriterion::entropy, 0, 4) == 0.0);
  }

  TEST_CASE("ctree: a feature unrelated to the label is not split") {
    const std::vector<double> x{1, 2, 3, 4, 1, 2, 3, 4};
    const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
    const auto info = numeric_schema(1).features()[0];
    CHECK(association_statistic(x, y, info) == 0.0);
    Rng rng(1);
    CHECK(permutation_test(x, y, info, 99, rng).p_value == 1.0);
    const auto tree = grow_ctree(column_matrix({x}), y, numeric_schema(1), {1, 1, 30, 0.0}, {0.05, 99}, 1);
    CHECK(tree.leaf_count() == 1);
  }

  TEST_CASE("ctree: a perfectly aligned feature reaches the smallest p-value") {
    std::vector<double> x(40);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) {
      y[i] = i % 2;
      x[i] = y[i] + 0.001 * i;
    }
    const auto info = numeric_schema(1).features()[0];
    Rng rng(2);
    const std::size_t B = 999;
    CHECK(permutation_test(x, y, info, B, rng).p_value == doctest::Approx(1.0 / (B + 1)));

    // A constant column never enters the test; the aligned one is split.
    const std::vector<double> flat(40, 3.0);
    const auto tree = grow_ctree(column_matrix({flat, x}), y, numeric_schema(2), {1, 1, 30, 0.0}, {0.05, B}, 3);
    REQUIRE(tree.nodes.size() > 1);
    CHECK(tree.nodes[0].feature == 1);
    const auto only_flat = grow_ctree(column_matrix({flat}), y, numeric_schema(1), {1, 1, 30, 0.0}, {0.05, B}, 3);
    CHECK(only_flat.leaf_count() == 1);
  }

  TEST_CASE("ctree: chi-square statistic for a categorical feature") {
    // 2x2 table [[3,1],[1,3]]: chi-square = 2.
    const std::vector<double> v{0, 0, 0, 1, 1, 1, 1, 0};
    const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
    const FeatureInfo info{"c", ColumnKind::categorical, {"a", "b"}, 0};
    CHECK(association_statistic(v, y, info) == doctest::Approx(2.0));
  }

  TEST_CASE("bagging: one identity member is the fully grown CART tree") {
    const auto d = small_synthetic(7, 300);
    ClassifierSpec spec = quick_spec(Algorithm::bag);
    spec.bag.members = 1;
    spec.bag.identity_bootstrap = true;
    const auto bag = fit_bagging(d, spec);
    ClassifierSpec cart_spec;
    cart_spec.tree = spec.bag.tree;
    const auto cart = fit_cart(d, cart_spec);
    CHECK(predict_proba(bag, d) == predict_proba(cart, d));
  }

  TEST_CASE("bagging: the ensemble is the mean of trees refit on its bootstrap samples") {
    const auto d = small_synthetic(8, 300);
    ClassifierSpec spec = quick_spec(Algorithm::bag);
    spec.bag.members = 3;
    spec.seed = 17;
    const auto bag = fit_bagging(d, spec);
    const auto schema = FeatureSchema::from_training(d);
    const auto raw = schema.bind(d);
    const auto y = binary_labels(d);
    std::vector<DecisionTree> trees;
    for (std::size_t m = 0; m < 3; ++m) {
      const auto rows = bootstrap_rows(d.n_rows(), 17, m);
      trees.push_back(grow_tree(raw, y, rows, schema, SplitCriterion::gini, spec.bag.tree));
    }
    const auto p = predict_proba(bag, d);
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
      double mean = 0.0;
      for (const auto& t : trees) mean += t.predict(raw.row(r));
      CHECK(p[r] == doctest::Approx(mean / 3.0).epsilon(1e-15));
    }
  }

  TEST_CASE("logit: a symmetric null design fits zero coefficients") {
    const auto model = fit_logit(labelled({{0, 0, 1, 1}}, {0, 1, 0, 1}), {});
    const auto& m = std::get<LogitModel>(model.state);
    CHECK(m.intercept == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.coefficients[0] == doctest::Approx(0.0).epsilon(1e-9));
  }

  TEST_CASE("logit: the fit maximizes the likelihood over a grid") {
    const std::vector<double> x{0, 0, 0, 1, 1, 1};
    const std::vector<int> y{0, 0, 1, 0, 1, 1};
    const auto model = fit_logit(labelled({x}, {0, 0, 1, 0, 1, 1}), {});
    const auto& m = std::get<LogitModel>(model.state);
    // Cell frequencies 1/3 and 2/3 give closed-form estimates.
    CHECK(m.intercept == doctest::Approx(-std::log(2.0)).epsilon(1e-7));
    CHECK(m.coefficients[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-7));

    auto ll = [&](double a, double b) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-(a + b * x[i])));
        s += y[i] ? std::log(p) : std::log(1.0 - p);
      }
      return s;
    };
    double best = -INFINITY, ba = 0, bb = 0;
    for (double a = -3; a <= 3; a += 0.01)
      for (double b = -3; b <= 3; b += 0.01)
        if (ll(a, b) > best) {
          best = ll(a, b);
          ba = a;
          bb = b;
        }
    CHECK(std::abs(ba - m.intercept) <= 0.01);
    CHECK(std::abs(bb - m.coefficients[0]) <= 0.01);
    CHECK(m.loglik >= best);
    CHECK(m.loglik == doctest::Approx(ll(m.intercept, m.coefficients[0])).epsilon(1e-12));
  }

  TEST_CASE("logit: complete separation is reported") {
    CHECK_THROWS_AS(fit_logit(labelled({{1, 2, 3, 4}}, {0, 0, 1, 1}), {}), SeparationError);
  }

  TEST_CASE("naive Bayes: posterior is the normalized product of hand densities") {
    const auto d = labelled({{1, 2, 3, 4, 6}}, {0, 0, 0, 1, 1})
                       .with_column(categorical("c", {"a", "b"}), {0, 0, 1, 1, 1});
    const auto model = fit_naive_bayes(d, {});
    // Class 0: mean 2, var 1, levels (2+1)/(3+2), (1+1)/(3+2).
    // Class 1: mean 5, var 2, levels (0+1)/(2+2), (2+1)/(2+2).
    const double at_x = 3.0;
    const double p0 = 0.6 * normal_pdf(at_x, 2.0, 1.0) * (3.0 / 5.0);
    const double p1 = 0.4 * normal_pdf(at_x, 5.0, 2.0) * (1.0 / 4.0);
    const Dataset probe = labelled({{at_x}}, {0}).with_column(categorical("c", {"a", "b"}), {0});
    CHECK(predict_proba(model, probe)[0] == doctest::Approx(p1 / (p0 + p1)).epsilon(1e-12));
  }

  TEST_CASE("naive Bayes: swapping the labels complements the posterior") {
    const auto d = small_synthetic(9, 300);
    const auto y = *d.role_column(ColumnRole::label);
    std::vector<double> flipped(d.column(y).begin(), d.column(y).end());
    for (auto& v : flipped) v = 1.0 - v;
    auto cols = std::vector<std::vector<double>>();
    for (std::size_t c = 0; c < d.n_cols(); ++c)
      cols.push_back(c == y ? flipped : std::vector<double>(d.column(c).begin(), d.column(c).end()));
    const Dataset swapped(d.schema(), cols);
    const auto a = predict_proba(fit_naive_bayes(d, {}), d);
    const auto b = predict_proba(fit_naive_bayes(swapped, {}), d);
    for (std::size_t r = 0; r < a.size(); ++r) CHECK(a[r] + b[r] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("network: zero weights give one half; a 2-2-1 forward pass by hand") {
    const AnnShape shape{2, 2};
    std::vector<double> params(shape.size(), 0.0);
    CHECK(ann_forward(shape, params, std::vector<double>{3.0, -1.0}) == 0.5);

    // w1 = [[1, -1], [0.5, 2]], b1 = [0.1, -0.2], w2 = [1.5, -0.5], b2 = 0.3
    params = {1, -1, 0.5, 2, 0.1, -0.2, 1.5, -0.5, 0.3};
    const double x0 = 0.4, x1 = -0.7;
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double h0 = sig(1 * x0 - 1 * x1 + 0.1);
    const double h1 = sig(0.5 * x0 + 2 * x1 - 0.2);
    const double expected = sig(1.5 * h0 - 0.5 * h1 + 0.3);
    CHECK(ann_forward(shape, params, std::vector<double>{x0, x1}) == doctest::Approx(expected).epsilon(1e-15));
  }

  TEST_CASE("network: analytic gradient matches central differences") {
    Rng rng(12);
    const AnnShape shape{3, 4};
    Matrix x(25, 3);
    for (auto& v : x.values) v = rng.normal();
    const auto y = fixtures::two_class_labels(rng, 25);
    std::vector<double> params(shape.size());
    for (auto& p : params) p = rng.uniform() - 0.5;
    std::vector<double> grad(shape.size());
    ann_objective(shape, params, x, y, 0.01, grad);
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto up = params, down = params;
      up[i] += h;
      down[i] -= h;
      const double fd = (ann_objective(shape, up, x, y, 0.01) - ann_objective(shape, down, x, y, 0.01)) / (2 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  TEST_CASE("every algorithm returns probabilities and survives a JSON round trip") {
    const auto d = small_synthetic(10);
    for (auto a : kAllAlgorithms) {
      CAPTURE(to_string(a));
      const auto model = fit_classifier(d, quick_spec(a));
      const auto p = predict_proba(model, d);
      REQUIRE(p.size() == d.n_rows());
      for (double v : p) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      const auto back = classifier_from_json(nlohmann::json::parse(to_json(model).dump()));
      CHECK(predict_proba(back, d) == p);
      CHECK(parse_algorithm(to_string(a)) == a);
    }
  }

  TEST_CASE("trees, logit and naive Bayes are invariant to affine feature rescaling") {
    const auto d = small_synthetic(11, 400);
    const auto moved = affine(d, 3.0, -2.0);
    for (auto a : {Algorithm::rpart, Algorithm::tree, Algorithm::logit, Algorithm::nb}) {
      CAPTURE(to_string(a));
      const auto p = predict_proba(fit_classifier(d, quick_spec(a)), d);
      const auto q = predict_proba(fit_classifier(moved, quick_spec(a)), moved);
      for (std::size_t r = 0; r < p.size(); ++r) CHECK(q[r] == doctest::Approx(p[r]).epsilon(1e-7));
    }
  }

  TEST_CASE("logit predictions do not depend on the order of the level vocabulary") {
    const auto d = small_synthetic(13, 400);
    const auto c = d.index_of("sector");
    auto spec = d.spec(c);
    auto reversed = spec;
    std::reverse(reversed.vocabulary.begin(), reversed.vocabulary.end());
    const double top = static_cast<double>(spec.vocabulary.size() - 1);
    std::vector<double> codes(d.column(c).begin(), d.column(c).end());
    for (auto& v : codes) v = top - v;
    std::vector<std::vector<double>> cols;
    Schema schema = d.schema();
    schema[c] = reversed;
    for (std::size_t j = 0; j < d.n_cols(); ++j)
      cols.push_back(j == c ? codes : std::vector<double>(d.column(j).begin(), d.column(j).end()));
    const Dataset recoded(schema, cols);
    const auto p = predict_proba(fit_logit(d, {}), d);
    const auto q = predict_proba(fit_logit(recoded, {}), recoded);
    for (std::size_t r = 0; r < p.size(); ++r) CHECK(q[r] == doctest::Approx(p[r]).epsilon(1e-9));
  }

  TEST_CASE("an unseen level maps to the reference level with a warning") {
    const auto train = labelled({{1, 2, 3, 4, 5, 6}}, {0, 0, 1, 0, 1, 1})
                           .with_column(categorical("c", {"a", "b"}), {0, 0, 0, 1, 1, 0});
    const auto model = fit_naive_bayes(train, {});
    const auto probe = labelled({{2.5, 2.5}}, {0, 0}).with_column(categorical("c", {"a", "b", "z"}), {0, 2});
    Warnings w;
    const auto p = predict_proba(model, probe, &w);
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("'z'") != std::string::npos);
    CHECK(p[0] == p[1]);  // 'a' is the most frequent training level
  }
}
