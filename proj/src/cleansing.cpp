#include "innosurv/cleansing.hpp"

#include <algorithm>
#include <set>

namespace innosurv {

namespace {

bool droppable(const ColumnSpec& spec) { return !is_exempt_role(spec.role); }

std::size_t count_missing(std::span<const double> column) {
  return static_cast<std::size_t>(std::count_if(column.begin(), column.end(), is_missing));
}

std::vector<std::string> names_not_in(const Dataset& before, const Dataset& after) {
  std::vector<std::string> out;
  for (const auto& spec : before.schema())
    if (!after.find(spec.name)) out.push_back(spec.name);
  return out;
}

MvaStage stage(std::string name, const Dataset& in, const Dataset& out, std::optional<double> threshold) {
  return {std::move(name), in.n_rows(), out.n_rows(), in.n_cols(), out.n_cols(), threshold,
          names_not_in(in, out)};
}

std::optional<double> class_ratio(const Dataset& data) {
  const auto label = data.role_column(ColumnRole::label);
  if (!label) return std::nullopt;
  std::size_t pos = 0, seen = 0;
  for (double v : data.column(*label)) {
    if (is_missing(v)) continue;
    ++seen;
    pos += v == 1.0;
  }
  if (seen == 0) return std::nullopt;
  return static_cast<double>(pos) / static_cast<double>(seen);
}

}  // namespace

MissingnessProfile profile_missing(const Dataset& data) {
  MissingnessProfile p;
  p.per_row_na.assign(data.n_rows(), 0);
  std::vector<double> col_counts;
  for (std::size_t c = 0; c < data.n_cols(); ++c) {
    const auto col = data.column(c);
    const std::size_t na = count_missing(col);
    p.per_column_na.emplace_back(data.spec(c).name, na);
    if (!droppable(data.spec(c))) continue;
    col_counts.push_back(static_cast<double>(na));
    for (std::size_t r = 0; r < col.size(); ++r) p.per_row_na[r] += is_missing(col[r]);
  }
  std::vector<double> row_counts(p.per_row_na.begin(), p.per_row_na.end());
  if (!col_counts.empty()) p.column_quartiles = quartiles(col_counts);
  if (!row_counts.empty()) p.row_quartiles = quartiles(row_counts);
  return p;
}

Dataset drop_rows_above_row_quartile(const Dataset& data, const MissingnessProfile& profile) {
  if (profile.per_row_na.size() != data.n_rows())
    throw DomainError("drop_rows_above_row_quartile: profile does not match the dataset");
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < data.n_rows(); ++r)
    if (static_cast<double>(profile.per_row_na[r]) <= profile.row_quartiles.q3) keep.push_back(r);
  return data.select_rows(keep);
}

Dataset drop_cols_above_col_quartile(const Dataset& data, const MissingnessProfile& profile) {
  if (profile.per_column_na.size() != data.n_cols())
    throw DomainError("drop_cols_above_col_quartile: profile does not match the dataset");
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < data.n_cols(); ++c) {
    if (!droppable(data.spec(c)) ||
        static_cast<double>(profile.per_column_na[c].second) <= profile.column_quartiles.q1)
      keep.push_back(c);
  }
  return data.select_columns(keep);
}

std::pair<Dataset, Dataset> harmonize(const Dataset& a, const Dataset& b, double threshold) {
  auto fraction = [](const Dataset& d, std::size_t c) {
    return d.n_rows() == 0 ? 0.0
                           : static_cast<double>(count_missing(d.column(c))) / static_cast<double>(d.n_rows());
  };
  std::set<std::string> keep_names;
  bool any_common = false;
  for (std::size_t c = 0; c < a.n_cols(); ++c) {
    if (!droppable(a.spec(c))) continue;
    const auto other = b.find(a.spec(c).name);
    if (!other || !droppable(b.spec(*other))) continue;
    any_common = true;
    if (fraction(a, c) > threshold || fraction(b, *other) > threshold) continue;
    keep_names.insert(a.spec(c).name);
  }
  if (!any_common) throw DomainError("harmonize: the datasets share no feature columns");

  auto restrict = [&](const Dataset& d) {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < d.n_cols(); ++c)
      if (!droppable(d.spec(c)) || keep_names.count(d.spec(c).name)) keep.push_back(c);
    return d.select_columns(keep);
  };
  return {restrict(a), restrict(b)};
}

RowFilterResult drop_incomplete_rows(const Dataset& data) {
  std::vector<std::size_t> checked;
  for (std::size_t c = 0; c < data.n_cols(); ++c) {
    const auto role = data.spec(c).role;
    if (role == ColumnRole::feature || role == ColumnRole::label) checked.push_back(c);
  }
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    bool complete = true;
    for (std::size_t c : checked)
      if (data.missing(r, c)) {
        complete = false;
        break;
      }
    if (complete) keep.push_back(r);
  }
  RowFilterResult out{data.select_rows(keep), false};
  out.emptied = data.n_rows() > 0 && keep.empty();
  return out;
}

MvaResult run_mva(const Dataset& primary, const std::optional<Dataset>& secondary, double threshold) {
  MvaReport report;
  report.primary_class_ratio_before = class_ratio(primary);

  const auto profile = profile_missing(primary);
  Dataset rows_dropped = drop_rows_above_row_quartile(primary, profile);
  report.primary.push_back(stage("drop_rows_above_q3", primary, rows_dropped, profile.row_quartiles.q3));

  const auto reprofile = profile_missing(rows_dropped);
  Dataset cols_dropped = drop_cols_above_col_quartile(rows_dropped, reprofile);
  report.primary.push_back(stage("drop_cols_above_q1", rows_dropped, cols_dropped, reprofile.column_quartiles.q1));

  Dataset a = std::move(cols_dropped);
  std::optional<Dataset> b;
  if (secondary) {
    // Columns discarded in the primary sample are discarded in the secondary too.
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < secondary->n_cols(); ++c) {
      const auto& spec = secondary->spec(c);
      if (!droppable(spec) || a.find(spec.name)) keep.push_back(c);
    }
    Dataset aligned = secondary->select_columns(keep);
    report.secondary.push_back(stage("align_to_primary", *secondary, aligned, std::nullopt));

    auto [ha, hb] = harmonize(a, aligned, threshold);
    report.primary.push_back(stage("harmonize", a, ha, threshold));
    report.secondary.push_back(stage("harmonize", aligned, hb, threshold));
    a = std::move(ha);
    b = std::move(hb);
  }

  auto complete_a = drop_incomplete_rows(a);
  report.primary.push_back(stage("drop_incomplete_rows", a, complete_a.data, std::nullopt));
  if (complete_a.emptied) report.warnings.push_back("primary sample: every row had a missing cell");
  if (b) {
    auto complete_b = drop_incomplete_rows(*b);
    report.secondary.push_back(stage("drop_incomplete_rows", *b, complete_b.data, std::nullopt));
    if (complete_b.emptied) report.warnings.push_back("secondary sample: every row had a missing cell");
    b = std::move(complete_b.data);
  }
  report.primary_class_ratio_after = class_ratio(complete_a.data);
  return {std::move(complete_a.data), std::move(b), std::move(report)};
}

}  // namespace innosurv
