#include "innosurv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "innosurv/stats.hpp"

namespace innosurv {

namespace {

using Wide = __int128;

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw DomainError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                      std::to_string(labels.size()) + ")");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DomainError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DomainError("both classes must be present");
  return {pos, neg};
}

double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  RocCurve roc;
  std::tie(roc.positives, roc.negatives) = class_counts(labels);
  for (double s : scores)
    if (!std::isfinite(s)) throw DomainError("scores must be finite");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double top = scores[order.front()];
  const double sentinel = top < 1.0 ? 1.0 : std::nextafter(top, HUGE_VAL);
  roc.points.push_back({sentinel, 0.0, 0.0, 0, 0});

  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp)++;
    roc.points.push_back({s, safe_ratio(fp, roc.negatives), safe_ratio(tp, roc.positives), fp, tp});
  }

  // Twice the area in units of one positive-negative pair, kept integral.
  Wide twice_area = 0;
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto& a = roc.points[i - 1];
    const auto& b = roc.points[i];
    twice_area += static_cast<Wide>(b.fp - a.fp) * static_cast<Wide>(a.tp + b.tp);
  }
  roc.auc = static_cast<double>(twice_area) /
            (2.0 * static_cast<double>(roc.positives) * static_cast<double>(roc.negatives));
  return roc;
}

double mann_whitney_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the number of correctly ordered pairs, plus ties once.
  Wide twice_wins = 0;
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::size_t p = 0;
    std::size_t n = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? p : n)++;
    twice_wins += static_cast<Wide>(p) * (2 * static_cast<Wide>(negatives_below) + static_cast<Wide>(n));
    negatives_below += n;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double ConfusionMatrix::sensitivity() const { return safe_ratio(tp, tp + fn); }
double ConfusionMatrix::specificity() const { return safe_ratio(tn, tn + fp); }
double ConfusionMatrix::precision() const { return safe_ratio(tp, tp + fp); }
double ConfusionMatrix::accuracy() const { return safe_ratio(tp + tn, tp + tn + fp + fn); }

ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double cutoff) {
  check_inputs(scores, labels);
  ConfusionMatrix m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= cutoff;
    if (labels[i] == 1)
      (predicted ? m.tp : m.fn)++;
    else
      (predicted ? m.fp : m.tn)++;
  }
  return m;
}

std::string_view to_string(CutoffCriterion criterion) {
  switch (criterion) {
    case CutoffCriterion::youden: return "youden";
    case CutoffCriterion::closest01: return "closest01";
    case CutoffCriterion::max_sens_spec_product: return "max_sens_spec_product";
  }
  return "youden";
}

CutoffCriterion parse_cutoff_criterion(std::string_view name) {
  for (auto c : kAllCriteria)
    if (to_string(c) == name) return c;
  throw DomainError("unknown cutoff criterion '" + std::string(name) + "'");
}

double select_cutoff(const RocCurve& roc, CutoffCriterion criterion) {
  if (roc.points.empty()) throw DomainError("empty ROC curve");
  const Wide P = static_cast<Wide>(roc.positives);
  const Wide N = static_cast<Wide>(roc.negatives);
  // Scaled so that a larger value is always better.
  auto merit = [&](const RocPoint& pt) -> Wide {
    const Wide tp = static_cast<Wide>(pt.tp);
    const Wide fp = static_cast<Wide>(pt.fp);
    switch (criterion) {
      case CutoffCriterion::youden: return tp * N - fp * P;
      case CutoffCriterion::closest01: {
        const Wide miss = (P - tp) * N;
        const Wide false_alarm = fp * P;
        return -(miss * miss + false_alarm * false_alarm);
      }
      case CutoffCriterion::max_sens_spec_product: return tp * (N - fp);
    }
    return 0;
  };
  std::size_t best = 0;
  Wide best_merit = merit(roc.points[0]);
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const Wide m = merit(roc.points[i]);
    if (m > best_merit) {
      best = i;
      best_merit = m;
    }
  }
  return roc.points[best].threshold;
}

double separation_score(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  double sum_pos = 0.0;
  double sum_neg = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? sum_pos : sum_neg) += scores[i];
  return std::abs(sum_pos / static_cast<double>(pos) - sum_neg / static_cast<double>(neg));
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b, Warnings* warnings) {
  if (a.size() < 2 || b.size() < 2) throw DomainError("Welch test needs at least two values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a);
  const double mb = mean(b);
  double va = variance(a);
  double vb = variance(b);
  if (va == 0.0 && vb == 0.0 && ma == mb) return {0.0, na + nb - 2.0, 1.0};
  if (va == 0.0) {
    va = kWelchVarianceFloor;
    warn(warnings, "Welch test: first sample has zero variance; floored");
  }
  if (vb == 0.0) {
    vb = kWelchVarianceFloor;
    warn(warnings, "Welch test: second sample has zero variance; floored");
  }
  const double sa = va / na;
  const double sb = vb / nb;
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  r.p_value = regularized_beta(r.df / (r.df + r.t * r.t), 0.5 * r.df, 0.5);
  return r;
}

ScoreEvaluation evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
  ScoreEvaluation out;
  out.roc = roc_curve(scores, labels);
  for (auto c : kAllCriteria) {
    const double cutoff = select_cutoff(out.roc, c);
    out.cutoffs.push_back({c, cutoff, confusion(scores, labels, cutoff)});
  }
  return out;
}

}  // namespace innosurv
