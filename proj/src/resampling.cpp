#include "innosurv/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "innosurv/errors.hpp"
#include "innosurv/rng.hpp"

namespace innosurv {

namespace {

std::size_t require_label(const Dataset& data, const char* op) {
  const auto label = data.role_column(ColumnRole::label);
  if (!label) throw DomainError(std::string(op) + ": dataset has no label column");
  for (double v : data.column(*label))
    if (is_missing(v)) throw DomainError(std::string(op) + ": label column has missing values");
  return *label;
}

}  // namespace

SplitResult split(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw DomainError("split: train_fraction must lie in (0, 1)");
  require_label(data, "split");
  const std::size_t n = data.n_rows();
  if (n < 2) throw DomainError("split: need at least 2 rows, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed, "split");
  rng.shuffle(std::span<std::size_t>(order));

  auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  SplitResult out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = data.select_rows(out.train_rows);
  out.test = data.select_rows(out.test_rows);
  return out;
}

std::vector<std::vector<std::size_t>> minority_neighbors(const Dataset& data,
                                                         const std::vector<std::size_t>& minority_rows,
                                                         std::size_t k) {
  std::vector<std::size_t> numeric;
  for (std::size_t c = 0; c < data.n_cols(); ++c)
    if (data.spec(c).role == ColumnRole::feature && data.spec(c).kind == ColumnKind::numeric) numeric.push_back(c);

  const std::size_t m = minority_rows.size();
  const std::size_t d = numeric.size();
  // Standardized minority feature matrix, row-major.
  std::vector<double> z(m * d);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += data.cell(minority_rows[i], numeric[j]);
    const double mu = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dv = data.cell(minority_rows[i], numeric[j]) - mu;
      ss += dv * dv;
    }
    const double sd = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
    const double scale = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < m; ++i) z[i * d + j] = (data.cell(minority_rows[i], numeric[j]) - mu) * scale;
  }

  std::vector<std::vector<std::size_t>> out(m);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < m; ++i) {
    dist.clear();
    for (std::size_t q = 0; q < m; ++q) {
      if (q == i) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = z[i * d + j] - z[q * d + j];
        s += diff * diff;
      }
      dist.emplace_back(s, q);
    }
    const std::size_t take = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    for (std::size_t t = 0; t < take; ++t) out[i].push_back(dist[t].second);
  }
  return out;
}

SmoteResult smote(const Dataset& train, const SmoteSpec& spec) {
  if (spec.k < 1) throw DomainError("smote: k must be at least 1");
  if (spec.over_pct < 0) throw DomainError("smote: over_pct must be nonnegative");
  if (spec.under_pct <= 0) throw DomainError("smote: under_pct must be positive");
  const std::size_t label_col = require_label(train, "smote");

  std::vector<std::size_t> features;
  for (std::size_t c = 0; c < train.n_cols(); ++c)
    if (train.spec(c).role == ColumnRole::feature) features.push_back(c);
  for (std::size_t c : features)
    for (double v : train.column(c))
      if (is_missing(v)) throw DomainError("smote: feature '" + train.spec(c).name + "' has missing values");

  std::vector<std::size_t> pos, neg;
  for (std::size_t r = 0; r < train.n_rows(); ++r) (train.cell(r, label_col) == 1.0 ? pos : neg).push_back(r);
  const bool positive_minority = pos.size() <= neg.size();
  const auto& minority = positive_minority ? pos : neg;
  const auto& majority = positive_minority ? neg : pos;
  if (minority.size() < spec.k + 1)
    throw DomainError("smote: minority class has " + std::to_string(minority.size()) +
                      " rows, need at least k + 1 = " + std::to_string(spec.k + 1));

  const auto neighbors = minority_neighbors(train, minority, spec.k);

  // Seeds: every minority row over_pct / 100 times, plus a random subset for
  // the fractional remainder.
  std::vector<std::size_t> seeds;
  const int whole = spec.over_pct / 100;
  for (std::size_t i = 0; i < minority.size(); ++i)
    for (int t = 0; t < whole; ++t) seeds.push_back(i);
  const int remainder = spec.over_pct % 100;
  if (remainder > 0) {
    std::vector<std::size_t> order(minority.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed, "smote.remainder");
    rng.shuffle(std::span<std::size_t>(order));
    const auto extra = static_cast<std::size_t>(
        std::llround(static_cast<double>(remainder) / 100.0 * static_cast<double>(minority.size())));
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(extra));
    std::sort(chosen.begin(), chosen.end());
    seeds.insert(seeds.end(), chosen.begin(), chosen.end());
  }

  SmoteResult out;
  out.minority_label = positive_minority ? 1.0 : 0.0;
  out.n_minority = minority.size();

  std::vector<std::vector<double>> synth(train.n_cols());
  Rng rng(spec.seed, "smote.synthesis");
  for (std::size_t s : seeds) {
    const auto& nn = neighbors[s];
    const std::size_t q = nn[rng.below(nn.size())];
    const double gap = rng.uniform_open();
    const std::size_t seed_row = minority[s];
    const std::size_t nb_row = minority[q];
    for (std::size_t c = 0; c < train.n_cols(); ++c) {
      const auto& cs = train.spec(c);
      double v = kMissing;
      if (cs.role == ColumnRole::label) {
        v = out.minority_label;
      } else if (cs.role == ColumnRole::feature) {
        const double a = train.cell(seed_row, c);
        v = cs.kind == ColumnKind::numeric ? a + gap * (train.cell(nb_row, c) - a) : a;
      }
      synth[c].push_back(v);
    }
    out.origins.push_back({seed_row, nb_row, gap});
  }

  const auto wanted = static_cast<std::size_t>(
      std::floor(static_cast<double>(spec.under_pct) / 100.0 * static_cast<double>(seeds.size())));
  std::vector<std::size_t> kept_majority = majority;
  if (wanted < majority.size()) {
    Rng urng(spec.seed, "smote.undersample");
    urng.shuffle(std::span<std::size_t>(kept_majority));
    kept_majority.resize(wanted);
    std::sort(kept_majority.begin(), kept_majority.end());
  }
  out.n_majority_kept = kept_majority.size();

  std::vector<std::size_t> rows = kept_majority;
  rows.insert(rows.end(), minority.begin(), minority.end());
  Dataset base = train.select_rows(rows);
  Dataset synthetic(train.schema(), std::move(synth));
  out.data = base.append_rows(synthetic);
  return out;
}

}  // namespace innosurv
