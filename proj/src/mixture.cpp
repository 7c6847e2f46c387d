#include "innosurv/mixture.hpp"

#include <cmath>
#include <string>

#include "innosurv/evaluation.hpp"

namespace innosurv {

void MixtureModel::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("mixture weight must lie in [0, 1]");
  if (!(cutoff_low >= 0.0 && cutoff_high <= 1.0 && cutoff_low < cutoff_high))
    throw DomainError("cutoffs must satisfy 0 <= low < high <= 1");
}

std::vector<double> mix_scores(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw DomainError("mixture components predict different row counts");
  std::vector<double> out(a.size());
  const double wb = 1.0 - alpha;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + wb * b[i];
  return out;
}

std::vector<double> predict_mixture(const MixtureModel& m, const Dataset& data, Warnings* warnings) {
  m.validate();
  if (!m.component_a || !m.component_b) throw DomainError("mixture is missing a component");
  if (!(m.component_a->schema == m.component_b->schema))
    throw DomainError("mixture components were trained on different feature schemas");
  const auto a = predict_proba(*m.component_a, data, warnings);
  const auto b = predict_proba(*m.component_b, data, nullptr);
  return mix_scores(a, b, m.alpha);
}

WeightSearch optimize_weight(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const int> labels, double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw DomainError("grid step must lie in (0, 1]");
  const double steps_real = 1.0 / grid_step;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-6 * steps_real)
    throw DomainError("1 / grid step must be an integer");
  if (scores_a.size() != labels.size() || scores_b.size() != labels.size())
    throw DomainError("scores and labels differ in length");

  WeightSearch out;
  out.trace.reserve(steps + 1);
  std::vector<double> mixed(labels.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i <= steps; ++i) {
    // Both weights from integers so that swapping components mirrors the trace exactly.
    const double wa = static_cast<double>(i) / static_cast<double>(steps);
    const double wb = static_cast<double>(steps - i) / static_cast<double>(steps);
    for (std::size_t r = 0; r < mixed.size(); ++r) mixed[r] = wa * scores_a[r] + wb * scores_b[r];
    MixtureTracePoint pt;
    pt.alpha = wa;
    pt.auc = roc_curve(mixed, labels).auc;
    pt.separation = separation_score(mixed, labels);
    pt.objective = pt.auc * pt.separation;
    out.trace.push_back(pt);
    if (pt.objective >= out.trace[best].objective) best = i;
  }
  out.alpha = out.trace[best].alpha;
  return out;
}

std::string_view to_string(AbstentionLabel label) {
  switch (label) {
    case AbstentionLabel::noinn: return "NOINN";
    case AbstentionLabel::inn: return "INN";
    case AbstentionLabel::unclassified: return "UNCLASSIFIED";
  }
  return "UNCLASSIFIED";
}

double AbstentionResult::fraction(AbstentionLabel label) const {
  return labels.empty() ? 0.0 : static_cast<double>(count(label)) / static_cast<double>(labels.size());
}

AbstentionResult classify_probabilities(std::span<const double> probabilities, double cutoff_low,
                                        double cutoff_high) {
  if (!(cutoff_low < cutoff_high)) throw DomainError("cutoff_low must be below cutoff_high");
  AbstentionResult out;
  out.labels.reserve(probabilities.size());
  for (double p : probabilities) {
    AbstentionLabel l = AbstentionLabel::unclassified;
    if (p < cutoff_low)
      l = AbstentionLabel::noinn;
    else if (p > cutoff_high)
      l = AbstentionLabel::inn;
    out.labels.push_back(l);
    ++out.counts[static_cast<std::size_t>(l)];
  }
  return out;
}

AbstentionResult classify_with_abstention(const MixtureModel& m, const Dataset& data, Warnings* warnings) {
  return classify_probabilities(predict_mixture(m, data, warnings), m.cutoff_low, m.cutoff_high);
}

}  // namespace innosurv
