#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace innosurv {

enum class ColumnKind { numeric, categorical };
enum class ColumnRole { feature, label, duration, event, id, strata };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);

// Label, duration, event and id columns are the analysis targets; the
// cleansing steps never drop them.
inline bool is_exempt_role(ColumnRole role) {
  return role == ColumnRole::label || role == ColumnRole::duration ||
         role == ColumnRole::event || role == ColumnRole::id;
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  ColumnRole role = ColumnRole::feature;
  // Ordered category codes. For categorical columns an empty vocabulary in a
  // schema file means "open": the codes are collected from the data in
  // first-seen order at load time.
  std::vector<std::string> vocabulary;

  bool operator==(const ColumnSpec&) const = default;
};

using Schema = std::vector<ColumnSpec>;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double cell) { return std::isnan(cell); }

// Column-oriented table. Numeric cells hold their value, categorical cells
// hold the vocabulary index, and missing cells hold NaN. Immutable once
// constructed; every constructor path validates the type invariants.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Schema schema, std::vector<std::vector<double>> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return schema_.size(); }
  const Schema& schema() const noexcept { return schema_; }
  const ColumnSpec& spec(std::size_t col) const { return schema_.at(col); }
  std::span<const double> column(std::size_t col) const { return columns_.at(col); }

  double cell(std::size_t row, std::size_t col) const { return columns_[col][row]; }
  bool missing(std::size_t row, std::size_t col) const { return is_missing(columns_[col][row]); }
  // Category code text for categorical cells; empty for missing cells.
  const std::string& level(std::size_t row, std::size_t col) const;

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws DomainError
  std::optional<std::size_t> role_column(ColumnRole role) const;
  std::vector<std::size_t> columns_with_role(ColumnRole role) const;

  Dataset select_rows(std::span<const std::size_t> rows) const;
  Dataset select_columns(std::span<const std::size_t> cols) const;
  Dataset with_column(ColumnSpec spec, std::vector<double> values) const;
  // Rows of `other` appended; schemas must match exactly.
  Dataset append_rows(const Dataset& other) const;

  // Cell-for-cell, bit-level equality (missing equals missing).
  bool operator==(const Dataset& other) const;

 private:
  void validate() const;

  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::size_t n_rows_ = 0;
};

struct CsvOptions {
  char separator = ';';
};

// Schema sidecar: one line per column, "name = kind,role[,code1|code2|...]".
// Blank lines and lines starting with '#' are ignored.
Schema read_schema(const std::filesystem::path& path);
Schema parse_schema(std::istream& in);
void write_schema(const Schema& schema, const std::filesystem::path& path);
std::string format_schema(const Schema& schema);

// Header must match the schema names exactly. Missing cells are the empty
// field or the literal NA.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema,
                 const CsvOptions& options = {});
Dataset read_csv(std::istream& in, const Schema& schema, const CsvOptions& options = {});
// Missing cells are written as empty fields; numbers in shortest round-trip form.
void write_csv(const Dataset& data, const std::filesystem::path& path,
               const CsvOptions& options = {});
void write_csv(const Dataset& data, std::ostream& out, const CsvOptions& options = {});

// Shortest text that parses back to exactly `value`.
std::string format_number(double value);

struct SyntheticSpec {
  std::size_t n_rows = 10000;
  std::size_t n_numeric = 20;
  std::size_t n_categorical = 2;
  double minority_fraction = 0.05;
  // Mean shift (in standard deviations) of each informative feature between
  // the classes. The first ceil(n_numeric / 2) numeric features are informative.
  double class_separation = 1.0;
  double hazard_ratio_true = 1.5;
  double censoring_horizon = 10.0;
  // Exit rate for label 0, per year.
  double baseline_hazard = 0.035;
  // Average per-cell probability of a missing feature cell; rates rise
  // linearly across the feature columns. Independent of the label.
  double missing_rate = 0.0;
  std::uint64_t seed = 1;
};

// Columns: firm_id (id), inno (label), duration, event, x01..xNN numeric
// features, then sector, location, cat3.. categorical features.
Dataset generate_synthetic(const SyntheticSpec& spec);

struct ColumnSummary {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::size_t missing = 0;
  // Numeric columns; unset when the column has no observed values.
  std::optional<double> min, q1, median, mean, q3, max;
  // Categorical columns, in vocabulary order.
  std::vector<std::pair<std::string, std::size_t>> frequencies;
};

struct DatasetSummary {
  std::size_t n_rows = 0;
  std::vector<ColumnSummary> columns;
};

DatasetSummary summarize(const Dataset& data);

}  // namespace innosurv
