#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "innosurv/errors.hpp"

namespace innosurv {

struct RocPoint {
  double threshold = 0.0;  // score >= threshold is classified positive
  double fpr = 0.0;
  double tpr = 0.0;
  std::size_t fp = 0;
  std::size_t tp = 0;
};

// Points run from the all-negative sentinel (0,0) to (1,1) with strictly
// decreasing thresholds. The sentinel threshold is 1, or just above the
// largest score when that score is already 1.
struct RocCurve {
  std::vector<RocPoint> points;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double auc = 0.0;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

// (#correctly ordered pairs + ties / 2) / (positives * negatives).
double mann_whitney_auc(std::span<const double> scores, std::span<const int> labels);

struct ConfusionMatrix {
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tp = 0;

  // Ratios with an empty denominator are reported as 0.
  double sensitivity() const;
  double specificity() const;
  double precision() const;
  double recall() const { return sensitivity(); }
  double accuracy() const;
};

ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double cutoff);

enum class CutoffCriterion { youden, closest01, max_sens_spec_product };

inline constexpr CutoffCriterion kAllCriteria[] = {CutoffCriterion::youden, CutoffCriterion::closest01,
                                                   CutoffCriterion::max_sens_spec_product};

std::string_view to_string(CutoffCriterion criterion);
CutoffCriterion parse_cutoff_criterion(std::string_view name);

// Optimum over the curve's thresholds, compared in exact integer arithmetic;
// ties go to the larger threshold.
double select_cutoff(const RocCurve& roc, CutoffCriterion criterion);

// |mean score of positives - mean score of negatives|.
double separation_score(std::span<const double> scores, std::span<const int> labels);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
};

// Samples with zero variance are floored at kWelchVarianceFloor (with a
// warning) unless both are constant and equal, which gives t = 0, p = 1.
inline constexpr double kWelchVarianceFloor = 1e-12;
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b, Warnings* warnings = nullptr);

// Everything the evaluate stage reports for one score vector.
struct CutoffReport {
  CutoffCriterion criterion;
  double cutoff = 0.0;
  ConfusionMatrix matrix;
};

struct ScoreEvaluation {
  RocCurve roc;
  std::vector<CutoffReport> cutoffs;  // one per criterion, in kAllCriteria order
};

ScoreEvaluation evaluate_scores(std::span<const double> scores, std::span<const int> labels);

}  // namespace innosurv
