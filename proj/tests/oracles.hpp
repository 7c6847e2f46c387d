#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Each one is the slow, direct reading of a definition.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "innosurv/cox.hpp"
#include "innosurv/dataset.hpp"
#include "innosurv/evaluation.hpp"
#include "innosurv/survival.hpp"

namespace oracles {

using innosurv::CoxTies;
using innosurv::CutoffCriterion;
using innosurv::SurvivalSample;

// (correctly ordered pairs + ties / 2) / (P N), by enumerating every pair.
inline double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
  long long twice = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) twice += 2;
      else if (scores[i] == scores[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

struct Counts {
  long long tp = 0, fp = 0;
};

inline Counts count_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] >= threshold) (labels[i] == 1 ? c.tp : c.fp)++;
  return c;
}

// Sweeps every distinct score plus the all-negative threshold (1, or just
// above the largest score), counting the confusion matrix directly at each
// one, and keeps the best under `criterion` (ties: larger threshold).
inline double sweep_cutoff(std::span<const double> scores, std::span<const int> labels, CutoffCriterion criterion) {
  const long long P = std::count(labels.begin(), labels.end(), 1);
  const long long N = static_cast<long long>(labels.size()) - P;
  std::set<double> thresholds(scores.begin(), scores.end());
  const double top = *thresholds.rbegin();
  thresholds.insert(top < 1.0 ? 1.0 : std::nextafter(top, INFINITY));

  double best_threshold = 0.0;
  __int128 best = 0;
  bool first = true;
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    const auto c = count_at(scores, labels, *it);
    __int128 merit = 0;  // larger is better
    switch (criterion) {
      case CutoffCriterion::youden:
        merit = static_cast<__int128>(c.tp) * N - static_cast<__int128>(c.fp) * P;
        break;
      case CutoffCriterion::closest01: {
        const __int128 miss = P - c.tp;
        merit = -(miss * miss * N * N + static_cast<__int128>(c.fp) * c.fp * P * P);
        break;
      }
      case CutoffCriterion::max_sens_spec_product:
        merit = static_cast<__int128>(c.tp) * (N - c.fp);
        break;
    }
    if (first || merit > best) {
      best = merit;
      best_threshold = *it;
      first = false;
    }
  }
  return best_threshold;
}

// Fraction of durations strictly greater than t.
inline double empirical_survival(std::span<const SurvivalSample> samples, double t) {
  double alive = 0.0;
  for (const auto& s : samples) alive += s.duration > t;
  return alive / static_cast<double>(samples.size());
}

// Partial log-likelihood straight from its definition: for every distinct
// event time, the tied deaths against the full risk set (Breslow) or with
// the risk set thinned by l/d of the tied deaths (Efron).
inline double naive_cox_loglik(const innosurv::Matrix& x, std::span<const SurvivalSample> samples,
                               std::span<const double> beta, CoxTies ties) {
  const std::size_t n = samples.size();
  std::vector<double> eta(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < beta.size(); ++j) eta[i] += x(i, j) * beta[j];
  std::set<double> times;
  for (const auto& s : samples)
    if (s.event) times.insert(s.duration);
  double ll = 0.0;
  for (double t : times) {
    double risk = 0.0, dead = 0.0, sum_eta = 0.0;
    std::size_t d = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (samples[i].duration >= t) risk += std::exp(eta[i]);
      if (samples[i].duration == t && samples[i].event) {
        dead += std::exp(eta[i]);
        sum_eta += eta[i];
        ++d;
      }
    }
    ll += sum_eta;
    for (std::size_t l = 0; l < d; ++l) {
      const double frac = ties == CoxTies::efron ? static_cast<double>(l) / static_cast<double>(d) : 0.0;
      ll -= std::log(risk - frac * dead);
    }
  }
  return ll;
}

struct LogrankSums {
  double observed = 0.0, expected = 0.0, variance = 0.0;
  double chi_square() const { return (observed - expected) * (observed - expected) / variance; }
};

// Two-group log-rank sums for `group_a`, recomputed per distinct event time.
inline LogrankSums naive_logrank(std::span<const SurvivalSample> samples, int group_a) {
  std::set<double> times;
  for (const auto& s : samples)
    if (s.event) times.insert(s.duration);
  LogrankSums out;
  for (double t : times) {
    double n = 0, n1 = 0, d = 0, d1 = 0;
    for (const auto& s : samples) {
      if (s.duration < t) continue;
      n += 1;
      n1 += s.group == group_a;
      if (s.duration == t && s.event) {
        d += 1;
        d1 += s.group == group_a;
      }
    }
    out.observed += d1;
    out.expected += d * n1 / n;
    if (n > 1) out.variance += d * (n1 / n) * (1 - n1 / n) * (n - d) / (n - 1);
  }
  return out;
}

// Indices (into `points`) of the k nearest points to points[i], excluding
// i, by brute-force distance over all pairs; ties to the lower index.
inline std::vector<std::size_t> nearest(const std::vector<std::vector<double>>& points, std::size_t i, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j == i) continue;
    double s = 0.0;
    for (std::size_t f = 0; f < points[i].size(); ++f) s += (points[i][f] - points[j][f]) * (points[i][f] - points[j][f]);
    d.emplace_back(s, j);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < k && m < d.size(); ++m) out.push_back(d[m].second);
  return out;
}

// Columns standardized by their mean and (n - 1) standard deviation.
inline std::vector<std::vector<double>> standardized(std::vector<std::vector<double>> points) {
  if (points.empty()) return points;
  const std::size_t m = points.size();
  for (std::size_t f = 0; f < points[0].size(); ++f) {
    double mu = 0.0;
    for (const auto& p : points) mu += p[f];
    mu /= static_cast<double>(m);
    double ss = 0.0;
    for (const auto& p : points) ss += (p[f] - mu) * (p[f] - mu);
    const double sd = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
    for (auto& p : points) p[f] = sd > 0.0 ? (p[f] - mu) / sd : p[f] - mu;
  }
  return points;
}

// Kolmogorov-Smirnov distance between a sample and the uniform law on [0,1].
inline double ks_uniform(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - values[i]);
    d = std::max(d, values[i] - static_cast<double>(i) / n);
  }
  return d;
}

}  // namespace oracles
