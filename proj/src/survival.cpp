#include "innosurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "innosurv/errors.hpp"
#include "innosurv/stats.hpp"

namespace innosurv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_samples(std::span<const SurvivalSample> samples) {
  if (samples.empty()) throw DomainError("survival analysis needs at least one subject");
  for (const auto& s : samples) {
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) throw DomainError("durations must be positive and finite");
    if (s.event != 0 && s.event != 1) throw DomainError("events must be 0 or 1");
  }
}

std::vector<std::size_t> by_duration(std::span<const SurvivalSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].duration < samples[b].duration; });
  return order;
}

}  // namespace

std::vector<SurvivalSample> survival_samples(const Dataset& data, std::span<const std::size_t> rows,
                                             const std::string& group) {
  const auto duration = data.role_column(ColumnRole::duration);
  const auto event = data.role_column(ColumnRole::event);
  if (!duration || !event) throw DomainError("dataset needs duration and event columns for survival analysis");
  std::optional<std::size_t> group_col;
  if (!group.empty()) {
    group_col = data.find(group);
    if (!group_col) throw DomainError("unknown group column '" + group + "'");
  }
  std::vector<SurvivalSample> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    SurvivalSample s;
    s.duration = data.cell(r, *duration);
    const double e = data.cell(r, *event);
    if (is_missing(s.duration) || is_missing(e))
      throw DomainError("row " + std::to_string(r + 1) + " has a missing duration or event");
    s.event = static_cast<int>(e);
    if (group_col) {
      const double g = data.cell(r, *group_col);
      if (is_missing(g)) throw DomainError("row " + std::to_string(r + 1) + " has a missing group");
      s.group = static_cast<int>(g);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<SurvivalSample> survival_samples(const Dataset& data, const std::string& group) {
  std::vector<std::size_t> rows(data.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  return survival_samples(data, rows, group);
}

KMCurve km_fit(std::span<const SurvivalSample> samples) {
  check_samples(samples);
  const auto order = by_duration(samples);
  KMCurve curve;
  curve.n = samples.size();
  double s = 1.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = samples[order[i]].duration;
    const std::size_t at_risk = order.size() - i;
    std::size_t deaths = 0;
    for (; i < order.size() && samples[order[i]].duration == t; ++i) deaths += static_cast<std::size_t>(samples[order[i]].event);
    if (deaths == 0) continue;
    s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
    curve.times.push_back(t);
    curve.deaths.push_back(deaths);
    curve.at_risk.push_back(at_risk);
    curve.survival.push_back(s);
  }
  return curve;
}

void greenwood_variance(KMCurve& curve) {
  curve.variance.assign(curve.size(), kNaN);
  curve.variance_defined.assign(curve.size(), false);
  double sum = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto r = static_cast<double>(curve.at_risk[i]);
    const auto d = static_cast<double>(curve.deaths[i]);
    if (r == d) break;
    sum += d / (r * (r - d));
    curve.variance[i] = curve.survival[i] * curve.survival[i] * sum;
    curve.variance_defined[i] = true;
  }
}

bool log_minus_log_interval(double survival, double sd, double z, double& lower, double& upper) {
  if (!(survival > 0.0 && survival < 1.0) || !std::isfinite(sd)) {
    lower = upper = kNaN;
    return false;
  }
  // lower = S^exp(+c), upper = S^exp(-c); both stay inside (0, 1).
  const double c = z * sd / (survival * std::abs(std::log(survival)));
  lower = std::pow(survival, std::exp(c));
  upper = std::pow(survival, std::exp(-c));
  return true;
}

void km_confidence(KMCurve& curve, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  if (curve.variance.size() != curve.size()) greenwood_variance(curve);
  const double z = normal_quantile(0.5 + 0.5 * level);
  curve.confidence_level = level;
  curve.ci_lower.assign(curve.size(), kNaN);
  curve.ci_upper.assign(curve.size(), kNaN);
  curve.ci_defined.assign(curve.size(), false);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!curve.variance_defined[i]) continue;
    curve.ci_defined[i] = log_minus_log_interval(curve.survival[i], std::sqrt(curve.variance[i]), z,
                                                 curve.ci_lower[i], curve.ci_upper[i]);
  }
}

KMCurve km_analysis(std::span<const SurvivalSample> samples, double level) {
  auto curve = km_fit(samples);
  greenwood_variance(curve);
  km_confidence(curve, level);
  return curve;
}

std::map<int, KMCurve> km_by_group(std::span<const SurvivalSample> samples, double level) {
  std::map<int, std::vector<SurvivalSample>> groups;
  for (const auto& s : samples) groups[s.group].push_back(s);
  std::map<int, KMCurve> out;
  for (const auto& [g, members] : groups) out.emplace(g, km_analysis(members, level));
  return out;
}

KMPoint km_at(const KMCurve& curve, double t) {
  KMPoint p;
  const auto it = std::upper_bound(curve.times.begin(), curve.times.end(), t);
  if (it == curve.times.begin()) return p;
  const auto i = static_cast<std::size_t>(it - curve.times.begin()) - 1;
  p.survival = curve.survival[i];
  if (i < curve.variance.size()) {
    p.variance = curve.variance[i];
    p.variance_defined = curve.variance_defined[i];
  }
  if (i < curve.ci_lower.size()) {
    p.ci_lower = curve.ci_lower[i];
    p.ci_upper = curve.ci_upper[i];
    p.ci_defined = curve.ci_defined[i];
  }
  return p;
}

LogrankResult logrank_test(std::span<const SurvivalSample> samples) {
  check_samples(samples);
  std::set<int> codes;
  for (const auto& s : samples) codes.insert(s.group);
  if (codes.size() != 2) throw DomainError("log-rank test needs exactly two groups, found " + std::to_string(codes.size()));
  const int group_a = *codes.begin();

  const auto order = by_duration(samples);
  std::size_t at_risk_a = 0;
  for (const auto& s : samples) at_risk_a += s.group == group_a;

  LogrankResult out;
  double diff = 0.0;
  std::size_t total_deaths = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = samples[order[i]].duration;
    const auto r = static_cast<double>(order.size() - i);
    const auto ra = static_cast<double>(at_risk_a);
    std::size_t d = 0;
    std::size_t da = 0;
    for (; i < order.size() && samples[order[i]].duration == t; ++i) {
      const auto& s = samples[order[i]];
      d += static_cast<std::size_t>(s.event);
      if (s.group == group_a) {
        da += static_cast<std::size_t>(s.event);
        --at_risk_a;
      }
    }
    if (d == 0) continue;
    total_deaths += d;
    const double dd = static_cast<double>(d);
    const double expected = dd * ra / r;
    out.observed_a += static_cast<double>(da);
    out.expected_a += expected;
    diff += static_cast<double>(da) - expected;
    if (r > 1.0) out.variance += dd * (ra / r) * (1.0 - ra / r) * (r - dd) / (r - 1.0);
  }
  if (total_deaths == 0) throw DomainError("log-rank test needs at least one event");
  out.chi_square = out.variance > 0.0 ? diff * diff / out.variance : 0.0;
  out.p_value = chi_square_sf(out.chi_square, 1.0);
  return out;
}

}  // namespace innosurv
