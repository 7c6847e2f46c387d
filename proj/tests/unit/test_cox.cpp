#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "innosurv/cox.hpp"
#include "innosurv/errors.hpp"
#include "oracles.hpp"

using namespace innosurv;
using fixtures::categorical;
using fixtures::numeric;

namespace {

DesignMatrix design_of(const Matrix& m) {
  DesignMatrix d;
  d.matrix = m;
  for (std::size_t j = 0; j < m.cols; ++j) {
    d.column_names.push_back("z" + std::to_string(j));
    d.term_of.push_back(d.column_names.back());
  }
  for (std::size_t i = 0; i < m.rows; ++i) d.rows.push_back(i);
  return d;
}

struct Fixture {
  Matrix x;
  std::vector<SurvivalSample> samples;
};

// Continuous covariates; `ties` rounds durations onto a coarse grid.
Fixture random_fixture(Rng& rng, std::size_t n, std::size_t p, bool ties) {
  Fixture f{Matrix(n, p), std::vector<SurvivalSample>(n)};
  for (auto& v : f.x.values) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < p; ++j) eta += 0.3 * f.x(i, j);
    double t = rng.exponential(std::exp(eta));
    if (ties) t = std::ceil(t * 3.0) / 3.0;
    f.samples[i] = {t, rng.bernoulli(0.8) ? 1 : 0, -1};
  }
  f.samples[0].event = 1;
  return f;
}

// Binary group covariate with distinct event times.
Fixture two_group_fixture(Rng& rng, std::size_t n) {
  Fixture f{Matrix(n, 1), std::vector<SurvivalSample>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int g = i % 2;
    f.x(i, 0) = g;
    f.samples[i] = {rng.exponential(g ? 1.4 : 1.0) + 1e-9 * static_cast<double>(i), rng.bernoulli(0.75) ? 1 : 0, g};
  }
  f.samples[0].event = 1;
  return f;
}

Dataset survival_dataset(const std::vector<double>& t, const std::vector<double>& e) {
  return Dataset({numeric("t", ColumnRole::duration), numeric("e", ColumnRole::event)}, {t, e});
}

}  // namespace

TEST_SUITE("cox") {
  TEST_CASE("partial likelihood matches the direct definition; gradient and Hessian match finite differences") {
    Rng rng(71);
    for (auto ties : {CoxTies::efron, CoxTies::breslow}) {
      CAPTURE(to_string(ties));
      for (int rep = 0; rep < 10; ++rep) {
        const auto f = random_fixture(rng, 40, 3, true);
        std::vector<double> beta{rng.normal() * 0.5, rng.normal() * 0.5, rng.normal() * 0.5};
        const auto pl = cox_partial_likelihood(f.x, f.samples, beta, ties);
        CHECK(pl.loglik == doctest::Approx(oracles::naive_cox_loglik(f.x, f.samples, beta, ties)).epsilon(1e-12));
        const double h = 1e-5;
        for (std::size_t j = 0; j < 3; ++j) {
          auto up = beta, down = beta;
          up[j] += h;
          down[j] -= h;
          const auto pu = cox_partial_likelihood(f.x, f.samples, up, ties);
          const auto pd = cox_partial_likelihood(f.x, f.samples, down, ties);
          CHECK(pl.gradient[j] == doctest::Approx((pu.loglik - pd.loglik) / (2 * h)).epsilon(1e-6));
          for (std::size_t k = 0; k < 3; ++k)
            CHECK(pl.hessian(k, j) == doctest::Approx((pu.gradient[k] - pd.gradient[k]) / (2 * h)).epsilon(1e-6));
        }
      }
    }
  }

  TEST_CASE("four-subject fixture: the estimate matches a grid maximizer") {
    // Partial likelihood e^b / (2e^b + 2) * 1 / (e^b + 2).
    Matrix x(4, 1);
    x(0, 0) = 1;
    x(2, 0) = 1;
    const std::vector<SurvivalSample> s{{1, 1, -1}, {2, 1, -1}, {3, 0, -1}, {4, 1, -1}};
    const auto fit = cox_fit(design_of(x), s);
    CHECK(fit.converged);
    auto ll = [](double b) { return b - std::log(2 * std::exp(b) + 2) - std::log(std::exp(b) + 2); };
    double best = -5.0;
    for (int i = 0; i <= 100000; ++i) {
      const double b = -5.0 + 1e-4 * i;
      if (ll(b) > ll(best)) best = b;
    }
    CHECK(std::abs(fit.beta[0] - best) <= 1e-4);
    CHECK(fit.loglik_fit == doctest::Approx(ll(fit.beta[0])).epsilon(1e-12));
    CHECK(fit.loglik_fit >= fit.loglik_null);
  }

  TEST_CASE("without tied event times Efron and Breslow coincide") {
    Rng rng(72);
    const auto f = random_fixture(rng, 80, 2, false);
    const auto e = cox_fit(design_of(f.x), f.samples, {CoxTies::efron});
    const auto b = cox_fit(design_of(f.x), f.samples, {CoxTies::breslow});
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(e.beta[j] - b.beta[j]) < 1e-10);
  }

  TEST_CASE("centering a column leaves the estimate unchanged") {
    Rng rng(73);
    const auto f = random_fixture(rng, 100, 2, true);
    auto shifted = f.x;
    for (std::size_t i = 0; i < shifted.rows; ++i) shifted(i, 0) -= 3.7;
    const auto a = cox_fit(design_of(f.x), f.samples);
    const auto b = cox_fit(design_of(shifted), f.samples);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(a.beta[j] - b.beta[j]) < 1e-8);
    CHECK(a.loglik_fit == doctest::Approx(b.loglik_fit).epsilon(1e-10));
  }

  TEST_CASE("score statistic for a group dummy equals the log-rank statistic") {
    Rng rng(74);
    for (int rep = 0; rep < 20; ++rep) {
      const auto f = two_group_fixture(rng, 30 + rng.below(50));
      const auto design = design_of(f.x);
      const auto fit = cox_fit(design, f.samples);
      const auto tests = cox_tests(fit, design, f.samples);
      REQUIRE(tests.score.has_value());
      CHECK(std::abs(tests.score->statistic - logrank_test(f.samples).chi_square) < 1e-8);
    }
  }

  TEST_CASE("tests: Wald, likelihood ratio and degrees of freedom") {
    Rng rng(75);
    const auto f = random_fixture(rng, 120, 2, true);
    const auto design = design_of(f.x);
    const auto fit = cox_fit(design, f.samples);
    const auto t = cox_tests(fit, design, f.samples);
    double wald = 0.0;
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) wald += fit.beta[j] * fit.information(j, k) * fit.beta[k];
    CHECK(t.wald.statistic == doctest::Approx(wald).epsilon(1e-12));
    CHECK(t.lr.statistic == doctest::Approx(2.0 * (fit.loglik_fit - fit.loglik_null)).epsilon(1e-12));
    CHECK(t.wald.df == 2.0);
    CHECK(t.lr.df == 2.0);
    CHECK(t.score->df == 2.0);
    for (double p : {t.wald.p_value, t.lr.p_value, t.score->p_value}) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }

  TEST_CASE("a design without columns fits the null model") {
    const std::vector<SurvivalSample> s{{1, 1, -1}, {2, 0, -1}, {3, 1, -1}};
    const auto fit = cox_fit(design_of(Matrix(3, 0)), s);
    CHECK(fit.beta.empty());
    CHECK(fit.loglik_fit == fit.loglik_null);
  }

  TEST_CASE("design coding: dummies, interactions and references") {
    const std::vector<double> t{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> e{1, 1, 0, 1, 1, 0, 1, 1};
    const auto d = survival_dataset(t, e)
                       .with_column(numeric("inno"), {0, 1, 0, 1, 0, 1, 0, 0})
                       .with_column(categorical("sector", {"C", "G", "F"}), {0, 0, 0, 1, 1, 2, 2, 0});
    const auto single = build_design(d, "inno");
    CHECK(single.p() == 1);

    const auto main = build_design(d, "sector", {{"sector", "C"}});
    CHECK(main.column_names == std::vector<std::string>{"sector[G]", "sector[F]"});
    CHECK(main.reference_levels.at("sector") == "C");

    const auto inter = build_design(d, "inno*sector", {{"sector", "C"}});
    REQUIRE(inter.p() == 5);
    CHECK(inter.column_names[3] == "inno:sector[G]");
    CHECK(inter.column_names[4] == "inno:sector[F]");
    for (std::size_t i = 0; i < inter.n(); ++i) {
      CHECK(inter.matrix(i, 3) == inter.matrix(i, 0) * inter.matrix(i, 1));
      CHECK(inter.matrix(i, 4) == inter.matrix(i, 0) * inter.matrix(i, 2));
    }
    CHECK(inter.term_of[4] == "inno:sector");

    const auto other_ref = build_design(d, "sector", {{"sector", "G"}});
    CHECK(other_ref.column_names == std::vector<std::string>{"sector[C]", "sector[F]"});
    CHECK_THROWS_AS(build_design(d, "sector", {{"sector", "Q"}}), DomainError);
    // Default reference: the most frequent level.
    CHECK(build_design(d, "sector").reference_levels.at("sector") == "C");
  }

  TEST_CASE("design: rows with a missing factor are dropped, all-zero interactions removed") {
    const auto d = survival_dataset({1, 2, 3, 4, 5}, {1, 1, 1, 0, 1})
                       .with_column(numeric("inno"), {0, 0, 1, 1, kMissing})
                       .with_column(categorical("sector", {"C", "G"}), {0, 1, 0, 0, 1});
    const auto design = build_design(d, "inno*sector");
    CHECK(design.rows == std::vector<std::size_t>{0, 1, 2, 3});
    // inno = 1 only in sector C, so inno:sector[G] is identically zero.
    REQUIRE(design.dropped.size() == 1);
    CHECK(design.dropped[0].name == "inno:sector[G]");
    CHECK(design.dropped[0].reason == "all zero");
  }

  TEST_CASE("formula parsing") {
    const auto terms = parse_formula("inno*sector + location");
    REQUIRE(terms.size() == 4);
    CHECK(format_term(terms[3]) == "inno:sector");
    CHECK_THROWS_AS(parse_formula(""), ParseError);
    CHECK_THROWS_AS(parse_formula("a + "), ParseError);
    CHECK(parse_references("# presets\nsector = C\n").at("sector") == "C");
    CHECK(parse_ties(to_string(CoxTies::breslow)) == CoxTies::breslow);
  }

  TEST_CASE("hazard ratios") {
    CHECK(hazard_ratio(0.0) == 1.0);
    CHECK(hazard_ratio(std::log(2.0)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(std::round(hazard_ratio(-0.428) * 1e4) / 1e4 == 0.6518);
    CHECK(std::round(hazard_ratio(-0.428) * 1e2) / 1e2 == 0.65);
  }

  TEST_CASE("separation screen: zero carrier events, balanced carriers, carriers first") {
    // Carriers never exit.
    Matrix none(6, 1);
    none(1, 0) = none(3, 0) = 1;
    const std::vector<SurvivalSample> s{{1, 1, -1}, {2, 0, -1}, {3, 1, -1}, {4, 0, -1}, {5, 1, -1}, {6, 1, -1}};
    auto flags = detect_separation(design_of(none), s);
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].column == "z0");
    CHECK(flags[0].direction == -1);

    Matrix balanced(6, 1);
    balanced(0, 0) = balanced(3, 0) = balanced(4, 0) = 1;
    CHECK(detect_separation(design_of(balanced), s).empty());

    // Carriers' exits all precede everyone else's.
    Matrix first(6, 1);
    first(0, 0) = first(2, 0) = 1;
    const std::vector<SurvivalSample> f{{1, 1, -1}, {5, 1, -1}, {2, 1, -1}, {6, 1, -1}, {7, 1, -1}, {8, 0, -1}};
    flags = detect_separation(design_of(first), f);
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].direction == 1);
    try {
      cox_fit(design_of(first), f);
      FAIL("expected a separation error");
    } catch (const SeparationError& err) {
      CHECK(err.column() == "z0");
    }
  }

  TEST_CASE("a duplicated column is reported as singular") {
    Rng rng(76);
    auto f = random_fixture(rng, 30, 1, false);
    Matrix two(30, 2);
    for (std::size_t i = 0; i < 30; ++i) two(i, 0) = two(i, 1) = f.x(i, 0);
    CHECK_THROWS_AS(cox_fit(design_of(two), f.samples), SingularError);
  }
}
