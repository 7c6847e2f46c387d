#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "innosurv/dataset.hpp"
#include "innosurv/errors.hpp"
#include "innosurv/stats.hpp"

namespace innosurv {

// Missing-value analysis. Row counts and the quartile thresholds only look at
// droppable columns (roles feature and strata); label, duration, event and id
// columns are reported in per_column_na but never drive or suffer a drop.
struct MissingnessProfile {
  // Every column, in dataset order.
  std::vector<std::pair<std::string, std::size_t>> per_column_na;
  std::vector<std::size_t> per_row_na;
  // Over droppable columns only.
  Quartiles column_quartiles;
  Quartiles row_quartiles;
};

MissingnessProfile profile_missing(const Dataset& data);

// Keeps rows whose NA count is <= Q3 of per_row_na.
Dataset drop_rows_above_row_quartile(const Dataset& data, const MissingnessProfile& profile);

// Keeps droppable columns whose NA count is <= Q1 of their per-column counts.
Dataset drop_cols_above_col_quartile(const Dataset& data, const MissingnessProfile& profile);

// Restricts both datasets to their common droppable columns, then removes any
// of those whose NA fraction exceeds `threshold` in either dataset.
std::pair<Dataset, Dataset> harmonize(const Dataset& a, const Dataset& b, double threshold = 0.30);

struct RowFilterResult {
  Dataset data;
  // Set when every row had a missing cell.
  bool emptied = false;
};

// Drops rows with a missing feature or label cell.
RowFilterResult drop_incomplete_rows(const Dataset& data);

struct MvaStage {
  std::string name;
  std::size_t rows_in = 0, rows_out = 0;
  std::size_t cols_in = 0, cols_out = 0;
  std::optional<double> threshold;
  std::vector<std::string> dropped_columns;
};

struct MvaReport {
  std::vector<MvaStage> primary;
  std::vector<MvaStage> secondary;
  std::optional<double> primary_class_ratio_before, primary_class_ratio_after;
  Warnings warnings;
};

struct MvaResult {
  Dataset primary;
  std::optional<Dataset> secondary;
  MvaReport report;
};

// The full chain: profile, drop rows above Q3, re-profile, drop columns above
// Q1 on the primary sample; then align the secondary sample to the surviving
// columns, harmonize at `threshold`, and drop incomplete rows in both.
MvaResult run_mva(const Dataset& primary, const std::optional<Dataset>& secondary,
                  double threshold = 0.30);

}  // namespace innosurv
