#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "innosurv/classifier.hpp"

namespace innosurv {

struct MixtureModel {
  double alpha = 0.5;  // weight of component_a
  std::shared_ptr<const TrainedClassifier> component_a;
  std::shared_ptr<const TrainedClassifier> component_b;
  double cutoff_low = 0.2;
  double cutoff_high = 0.8;

  // Throws DomainError unless 0 <= alpha <= 1 and 0 <= low < high <= 1.
  void validate() const;
};

// alpha * a + (1 - alpha) * b, elementwise.
std::vector<double> mix_scores(std::span<const double> a, std::span<const double> b, double alpha);

std::vector<double> predict_mixture(const MixtureModel& m, const Dataset& data, Warnings* warnings = nullptr);

struct MixtureTracePoint {
  double alpha = 0.0;
  double auc = 0.0;
  double separation = 0.0;
  double objective = 0.0;  // auc * separation
};

struct WeightSearch {
  double alpha = 0.0;
  std::vector<MixtureTracePoint> trace;  // alpha ascending
};

// Exhaustive search over alpha = 0, step, ..., 1; 1 / grid_step must be an
// integer. The maximum with the largest alpha wins.
WeightSearch optimize_weight(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const int> labels, double grid_step = 0.01);

enum class AbstentionLabel { noinn, inn, unclassified };

std::string_view to_string(AbstentionLabel label);

struct AbstentionResult {
  std::vector<AbstentionLabel> labels;
  std::array<std::size_t, 3> counts{};  // indexed by AbstentionLabel

  std::size_t count(AbstentionLabel label) const { return counts[static_cast<std::size_t>(label)]; }
  double fraction(AbstentionLabel label) const;
};

// p < low is NOINN, p > high is INN, anything else (including p equal to a
// cutoff) is left unclassified.
AbstentionResult classify_probabilities(std::span<const double> probabilities, double cutoff_low,
                                        double cutoff_high);
AbstentionResult classify_with_abstention(const MixtureModel& m, const Dataset& data,
                                          Warnings* warnings = nullptr);

}  // namespace innosurv
