#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "innosurv/evaluation.hpp"
#include "innosurv/mixture.hpp"
#include "oracles.hpp"

using namespace innosurv;

namespace {

struct Scores {
  std::vector<double> a, b;
  std::vector<int> y;
};

Scores noisy_scores(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Scores s;
  s.y = fixtures::two_class_labels(rng, n, 0.4);
  for (int label : s.y) {
    s.a.push_back(std::clamp(0.5 + 0.25 * (label - 0.5) + 0.2 * rng.normal(), 0.0, 1.0));
    s.b.push_back(std::clamp(0.5 + 0.15 * (label - 0.5) + 0.2 * rng.normal(), 0.0, 1.0));
  }
  return s;
}

}  // namespace

TEST_SUITE("mixture") {
  TEST_CASE("weights 0 and 1 return one component; 0.4 mixes by hand") {
    const std::vector<double> a{0.2, 0.9, 0.5}, b{0.6, 0.1, 0.5};
    CHECK(mix_scores(a, b, 1.0) == a);
    CHECK(mix_scores(a, b, 0.0) == b);
    const auto m = mix_scores(a, b, 0.4);
    CHECK(m[0] == doctest::Approx(0.44).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(0.42).epsilon(1e-15));
    CHECK(m[2] == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("a perfect first component dominates: the search picks alpha = 1") {
    Rng rng(51);
    const auto y = fixtures::two_class_labels(rng, 60);
    std::vector<double> a, b;
    for (int l : y) {
      a.push_back(l);
      b.push_back(rng.uniform());
    }
    const auto search = optimize_weight(a, b, y, 0.01);
    CHECK(search.alpha == 1.0);
    CHECK(search.trace.back().auc == 1.0);
    CHECK(search.trace.back().separation == 1.0);
  }

  TEST_CASE("swapping the components mirrors the trace") {
    const auto s = noisy_scores(52, 120);
    const auto ab = optimize_weight(s.a, s.b, s.y, 0.05);
    const auto ba = optimize_weight(s.b, s.a, s.y, 0.05);
    REQUIRE(ab.trace.size() == 21);
    REQUIRE(ba.trace.size() == 21);
    for (std::size_t i = 0; i < ab.trace.size(); ++i) {
      const auto& p = ab.trace[i];
      const auto& q = ba.trace[ab.trace.size() - 1 - i];
      CHECK(p.alpha == doctest::Approx(1.0 - q.alpha).epsilon(1e-15));
      CHECK(p.auc == q.auc);
      CHECK(p.separation == doctest::Approx(q.separation).epsilon(1e-12));
    }
  }

  TEST_CASE("trace entries match direct computation and the optimum is the largest best alpha") {
    const auto s = noisy_scores(53, 50);
    const auto search = optimize_weight(s.a, s.b, s.y, 0.01);
    REQUIRE(search.trace.size() == 101);
    double best = -1.0, best_alpha = 0.0;
    for (const auto& pt : search.trace) {
      std::vector<double> mixed(s.a.size());
      for (std::size_t r = 0; r < mixed.size(); ++r) mixed[r] = pt.alpha * s.a[r] + (1.0 - pt.alpha) * s.b[r];
      double m1 = 0, m0 = 0, n1 = 0, n0 = 0;
      for (std::size_t r = 0; r < mixed.size(); ++r) (s.y[r] ? m1 : m0) += mixed[r], (s.y[r] ? n1 : n0) += 1;
      const double sep = std::abs(m1 / n1 - m0 / n0);
      CHECK(pt.auc == doctest::Approx(oracles::pairwise_auc(mixed, s.y)).epsilon(1e-12));
      CHECK(pt.separation == doctest::Approx(sep).epsilon(1e-12));
      CHECK(pt.objective == doctest::Approx(pt.auc * pt.separation).epsilon(1e-15));
      if (pt.objective >= best) {
        best = pt.objective;
        best_alpha = pt.alpha;
      }
    }
    CHECK(search.alpha == best_alpha);

    // A ten-times finer grid contains this one, so it can only do as well or better.
    const auto fine = optimize_weight(s.a, s.b, s.y, 0.001);
    double fine_best = 0.0;
    for (const auto& pt : fine.trace) fine_best = std::max(fine_best, pt.objective);
    CHECK(fine_best >= best - 1e-12);
  }

  TEST_CASE("grid steps that do not divide one are rejected") {
    const auto s = noisy_scores(54, 20);
    CHECK_THROWS_AS(optimize_weight(s.a, s.b, s.y, 0.03), DomainError);
    CHECK_THROWS_AS(optimize_weight(s.a, s.b, s.y, 0.0), DomainError);
    CHECK(optimize_weight(s.a, s.b, s.y, 1.0).trace.size() == 2);
  }

  TEST_CASE("abstention: strict inequalities, cutoff values stay unclassified") {
    const std::vector<double> p{0.1, 0.2, 0.5, 0.8, 0.9, 0.0, 1.0};
    const auto r = classify_probabilities(p, 0.2, 0.8);
    const std::vector<AbstentionLabel> expected{AbstentionLabel::noinn,        AbstentionLabel::unclassified,
                                                AbstentionLabel::unclassified, AbstentionLabel::unclassified,
                                                AbstentionLabel::inn,          AbstentionLabel::noinn,
                                                AbstentionLabel::inn};
    CHECK(r.labels == expected);
    CHECK(r.count(AbstentionLabel::noinn) == 2);
    CHECK(r.count(AbstentionLabel::inn) == 2);
    CHECK(r.count(AbstentionLabel::unclassified) == 3);
    CHECK(r.fraction(AbstentionLabel::unclassified) == doctest::Approx(3.0 / 7.0));
  }

  TEST_CASE("abstention: a degenerate band is rejected and the model validates its cutoffs") {
    CHECK_THROWS_AS(classify_probabilities(std::vector<double>{0.5}, 0.5, 0.5), DomainError);
    MixtureModel m;
    m.cutoff_low = 0.9;
    m.cutoff_high = 0.1;
    CHECK_THROWS_AS(m.validate(), DomainError);
    m = MixtureModel{};
    m.alpha = 1.5;
    CHECK_THROWS_AS(m.validate(), DomainError);
  }

  TEST_CASE("abstention: counts sum to n and widening the band only adds abstentions") {
    Rng rng(55);
    const auto p = fixtures::uniform_vector(rng, 500);
    std::size_t previous = 0;
    for (double w = 0.05; w < 0.5; w += 0.05) {
      const auto r = classify_probabilities(p, 0.5 - w, 0.5 + w);
      CHECK(r.counts[0] + r.counts[1] + r.counts[2] == 500);
      const auto abstained = r.count(AbstentionLabel::unclassified);
      CHECK(abstained >= previous);
      previous = abstained;
    }
  }
}
