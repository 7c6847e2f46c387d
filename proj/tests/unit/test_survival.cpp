#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "innosurv/errors.hpp"
#include "innosurv/survival.hpp"
#include "oracles.hpp"

using namespace innosurv;

namespace {

constexpr double kZ95 = 1.959964;

// Ten subjects: two exits at t=1, one at t=2, seven at t=5.
std::vector<SurvivalSample> ten_subjects() {
  std::vector<SurvivalSample> s;
  for (int i = 0; i < 10; ++i) s.push_back({i < 2 ? 1.0 : (i == 2 ? 2.0 : 5.0), 1, -1});
  return s;
}

std::vector<SurvivalSample> random_samples(Rng& rng, std::size_t n, double censor_p, bool grouped) {
  std::vector<SurvivalSample> s(n);
  for (auto& x : s) {
    x.duration = 0.1 + rng.exponential(0.5);
    x.event = rng.bernoulli(censor_p) ? 0 : 1;
    x.group = grouped ? static_cast<int>(rng.below(2)) : -1;
  }
  return s;
}

}  // namespace

TEST_SUITE("survival") {
  TEST_CASE("ten-subject worked example: estimate, Greenwood variance and interval") {
    const auto curve = km_analysis(ten_subjects(), 0.95);
    REQUIRE(curve.size() == 3);
    CHECK(curve.times[0] == 1.0);
    CHECK(curve.at_risk[0] == 10);
    CHECK(curve.deaths[0] == 2);
    CHECK(curve.survival[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(curve.survival[1] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(std::abs(curve.variance[0] - 0.016) < 1e-12);
    CHECK(std::sqrt(curve.variance[0]) == doctest::Approx(0.1265).epsilon(1e-3));

    const double c = kZ95 * std::sqrt(0.016) / (0.8 * std::abs(std::log(0.8)));
    REQUIRE(curve.ci_defined[0]);
    CHECK(std::abs(curve.ci_lower[0] - std::pow(0.8, std::exp(c))) < 1e-6);
    CHECK(std::abs(curve.ci_upper[0] - std::pow(0.8, std::exp(-c))) < 1e-6);
    CHECK(curve.ci_lower[0] <= 0.8);
    CHECK(curve.ci_upper[0] >= 0.8);
    // Everyone has exited at t=5: the estimate is 0, the interval undefined.
    CHECK(curve.survival[2] == 0.0);
    CHECK_FALSE(curve.ci_defined[2]);
  }

  TEST_CASE("without censoring the estimate is the empirical survivor fraction") {
    Rng rng(61);
    for (int rep = 0; rep < 25; ++rep) {
      auto s = random_samples(rng, 1 + rng.below(50), 0.0, false);
      // Rounded durations create tied exits.
      if (rep % 2) for (auto& x : s) x.duration = std::ceil(x.duration * 4.0) / 4.0;
      const auto curve = km_fit(s);
      for (const auto& x : s) {
        CHECK(km_at(curve, x.duration).survival == doctest::Approx(oracles::empirical_survival(s, x.duration)).epsilon(1e-12));
        CHECK(km_at(curve, x.duration * 0.999).survival ==
              doctest::Approx(oracles::empirical_survival(s, x.duration * 0.999)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("no events leave the estimate at one; a single exit drops it to zero") {
    std::vector<SurvivalSample> censored{{1.0, 0, -1}, {2.0, 0, -1}, {3.0, 0, -1}};
    const auto flat = km_analysis(censored);
    CHECK(flat.size() == 0);
    CHECK(km_at(flat, 10.0).survival == 1.0);
    CHECK(km_at(flat, 10.0).variance == 0.0);

    const std::vector<SurvivalSample> one{{3.0, 1, -1}};
    CHECK(km_at(km_fit(one), 3.0).survival == 0.0);
    CHECK(km_at(km_fit(one), 2.9).survival == 1.0);
    CHECK_THROWS_AS(km_fit(std::vector<SurvivalSample>{}), DomainError);
  }

  TEST_CASE("censoring tied with an exit stays in the risk set at that time") {
    const std::vector<SurvivalSample> s{{1.0, 1, -1}, {1.0, 0, -1}, {2.0, 1, -1}, {3.0, 0, -1}};
    const auto curve = km_fit(s);
    CHECK(curve.at_risk[0] == 4);
    CHECK(curve.survival[0] == 0.75);
    CHECK(curve.at_risk[1] == 2);
    CHECK(curve.survival[1] == 0.375);
  }

  TEST_CASE("structural invariants on random censored data") {
    Rng rng(62);
    for (int rep = 0; rep < 20; ++rep) {
      const auto s = random_samples(rng, 5 + rng.below(60), 0.3, false);
      const auto curve = km_analysis(s, 0.95);
      for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve.deaths[i] <= curve.at_risk[i]);
        if (i > 0) {
          CHECK(curve.times[i] > curve.times[i - 1]);
          CHECK(curve.at_risk[i] < curve.at_risk[i - 1]);
          CHECK(curve.survival[i] <= curve.survival[i - 1]);
        }
        if (curve.ci_defined[i]) {
          CHECK(curve.ci_lower[i] >= 0.0);
          CHECK(curve.ci_lower[i] <= curve.survival[i]);
          CHECK(curve.survival[i] <= curve.ci_upper[i]);
          CHECK(curve.ci_upper[i] <= 1.0);
        }
      }
    }
  }

  TEST_CASE("Greenwood sum grows while the estimate is interior") {
    Rng rng(63);
    for (int rep = 0; rep < 20; ++rep) {
      const auto s = random_samples(rng, 30, 0.2, false);
      const auto curve = km_analysis(s);
      for (std::size_t i = 1; i < curve.size(); ++i) {
        if (!curve.variance_defined[i] || curve.survival[i] <= 0.0) break;
        const double prev = curve.variance[i - 1] / (curve.survival[i - 1] * curve.survival[i - 1]);
        const double now = curve.variance[i] / (curve.survival[i] * curve.survival[i]);
        CHECK(now >= prev);
      }
    }
  }

  TEST_CASE("intervals widen with the confidence level") {
    auto narrow = km_analysis(ten_subjects(), 0.90);
    auto wide = km_analysis(ten_subjects(), 0.99);
    for (std::size_t i = 0; i < narrow.size(); ++i) {
      if (!narrow.ci_defined[i]) continue;
      CHECK(wide.ci_lower[i] < narrow.ci_lower[i]);
      CHECK(wide.ci_upper[i] > narrow.ci_upper[i]);
    }
    double lo = 0, hi = 0;
    CHECK_FALSE(log_minus_log_interval(1.0, 0.1, kZ95, lo, hi));
    CHECK_FALSE(log_minus_log_interval(0.0, 0.1, kZ95, lo, hi));
  }

  TEST_CASE("log-rank on the four-subject fixture by hand") {
    // Group 0 exits at 1, censored at 3; group 1 exits at 2, censored at 4.
    // t=1: O-E = 1 - 2/4, V = 1/4.  t=2: O-E = 0 - 1/3, V = 2/9.
    const std::vector<SurvivalSample> s{{1.0, 1, 0}, {3.0, 0, 0}, {2.0, 1, 1}, {4.0, 0, 1}};
    const auto r = logrank_test(s);
    CHECK(r.observed_a == 1.0);
    CHECK(r.expected_a == doctest::Approx(0.5 + 1.0 / 3.0).epsilon(1e-15));
    CHECK(r.variance == doctest::Approx(0.25 + 2.0 / 9.0).epsilon(1e-15));
    CHECK(r.chi_square == doctest::Approx(1.0 / 17.0).epsilon(1e-14));
    CHECK(r.df == 1.0);
  }

  TEST_CASE("log-rank sums against the per-time recount, and invariance to relabeling") {
    Rng rng(64);
    for (int rep = 0; rep < 30; ++rep) {
      auto s = random_samples(rng, 10 + rng.below(80), 0.3, true);
      if (rep % 2) for (auto& x : s) x.duration = std::ceil(x.duration * 2.0) / 2.0;
      if (std::none_of(s.begin(), s.end(), [](auto& x) { return x.event; })) s[0].event = 1;
      if (std::all_of(s.begin(), s.end(), [&](auto& x) { return x.group == s[0].group; })) s[0].group = 1 - s[0].group;
      const auto r = logrank_test(s);
      const auto o = oracles::naive_logrank(s, 0);
      CHECK(r.observed_a == o.observed);
      CHECK(r.expected_a == doctest::Approx(o.expected).epsilon(1e-12));
      CHECK(r.variance == doctest::Approx(o.variance).epsilon(1e-12));
      CHECK(r.chi_square == doctest::Approx(o.chi_square()).epsilon(1e-10));

      auto swapped = s;
      for (auto& x : swapped) x.group = 1 - x.group;
      CHECK(logrank_test(swapped).chi_square == doctest::Approx(r.chi_square).epsilon(1e-12));
      for (auto& x : swapped) x.group = x.group == 0 ? 7 : 3;
      CHECK(logrank_test(swapped).chi_square == doctest::Approx(r.chi_square).epsilon(1e-12));
    }
  }

  TEST_CASE("identical groups give a zero statistic") {
    Rng rng(65);
    const auto base = random_samples(rng, 20, 0.3, false);
    std::vector<SurvivalSample> s;
    for (auto x : base) {
      x.group = 0;
      s.push_back(x);
      x.group = 1;
      s.push_back(x);
    }
    const auto r = logrank_test(s);
    CHECK(r.chi_square == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("log-rank needs two groups and at least one exit") {
    CHECK_THROWS_AS(logrank_test(std::vector<SurvivalSample>{{1.0, 1, 0}, {2.0, 1, 0}}), DomainError);
    CHECK_THROWS_AS(logrank_test(std::vector<SurvivalSample>{{1.0, 0, 0}, {2.0, 0, 1}}), DomainError);
  }

  TEST_CASE("per-group curves and samples from a dataset") {
    SyntheticSpec spec;
    spec.n_rows = 400;
    spec.minority_fraction = 0.3;
    spec.seed = 6;
    const auto d = generate_synthetic(spec);
    const auto s = survival_samples(d, "inno");
    REQUIRE(s.size() == 400);
    const auto curves = km_by_group(s);
    REQUIRE(curves.size() == 2);
    CHECK(curves.at(0).n + curves.at(1).n == 400);
    std::vector<SurvivalSample> only_zero;
    for (const auto& x : s)
      if (x.group == 0) only_zero.push_back(x);
    CHECK(km_fit(only_zero).survival == curves.at(0).survival);
  }
}
