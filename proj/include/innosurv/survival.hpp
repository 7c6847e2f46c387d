#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "innosurv/dataset.hpp"

namespace innosurv {

struct SurvivalSample {
  double duration = 0.0;  // > 0
  int event = 0;          // 1 = exit, 0 = right-censored
  int group = -1;         // -1 when ungrouped
};

// Samples for `rows` of a dataset with duration and event columns. `group`,
// when given, must name a column whose values become the group codes.
std::vector<SurvivalSample> survival_samples(const Dataset& data, std::span<const std::size_t> rows,
                                             const std::string& group = {});
std::vector<SurvivalSample> survival_samples(const Dataset& data, const std::string& group = {});

// Step estimate at the distinct event times. Censored subjects tied with an
// event time are still at risk at that time.
struct KMCurve {
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<std::size_t> deaths;
  std::vector<std::size_t> at_risk;
  std::vector<double> survival;

  // Filled by greenwood_variance. Entries at and after a step where every
  // subject at risk died are NaN with variance_defined = false.
  std::vector<double> variance;
  std::vector<bool> variance_defined;

  // Filled by km_confidence. Undefined (NaN, flag false) where the estimate
  // is 0 or 1 or its variance is undefined.
  double confidence_level = 0.0;
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  std::vector<bool> ci_defined;

  std::size_t size() const noexcept { return times.size(); }
};

KMCurve km_fit(std::span<const SurvivalSample> samples);
void greenwood_variance(KMCurve& curve);
void km_confidence(KMCurve& curve, double level = 0.95);

// km_fit, greenwood_variance and km_confidence in one call.
KMCurve km_analysis(std::span<const SurvivalSample> samples, double level = 0.95);

// One curve per group code.
std::map<int, KMCurve> km_by_group(std::span<const SurvivalSample> samples, double level = 0.95);

// The step function's value at `t` (1 before the first event time).
struct KMPoint {
  double survival = 1.0;
  double variance = 0.0;
  bool variance_defined = true;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool ci_defined = false;
};

KMPoint km_at(const KMCurve& curve, double t);

// Log-minus-log interval for one estimate; false where undefined.
bool log_minus_log_interval(double survival, double sd, double z, double& lower, double& upper);

struct LogrankResult {
  double chi_square = 0.0;
  double df = 1.0;
  double p_value = 1.0;
  double observed_a = 0.0;  // deaths in the group with the smaller code
  double expected_a = 0.0;
  double variance = 0.0;
};

// Two-group test; the groups are the two distinct codes present.
LogrankResult logrank_test(std::span<const SurvivalSample> samples);

}  // namespace innosurv
