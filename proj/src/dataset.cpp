#include "innosurv/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "innosurv/errors.hpp"
#include "innosurv/rng.hpp"
#include "innosurv/stats.hpp"

namespace innosurv {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_missing_token(std::string_view field) { return field.empty() || field == "NA"; }

bool bits_equal(double a, double b) {
  if (is_missing(a) || is_missing(b)) return is_missing(a) && is_missing(b);
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::feature: return "feature";
    case ColumnRole::label: return "label";
    case ColumnRole::duration: return "duration";
    case ColumnRole::event: return "event";
    case ColumnRole::id: return "id";
    case ColumnRole::strata: return "strata";
  }
  return "feature";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::numeric;
  if (text == "categorical") return ColumnKind::categorical;
  throw ParseError("unknown column kind '" + std::string(text) + "'");
}

ColumnRole parse_column_role(std::string_view text) {
  static constexpr std::array<ColumnRole, 6> roles = {
      ColumnRole::feature, ColumnRole::label, ColumnRole::duration,
      ColumnRole::event,   ColumnRole::id,    ColumnRole::strata};
  for (auto role : roles)
    if (to_string(role) == text) return role;
  throw ParseError("unknown column role '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Schema schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.size() != columns_.size())
    throw DomainError("dataset: " + std::to_string(schema_.size()) + " column specs but " +
                      std::to_string(columns_.size()) + " columns");
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  validate();
}

void Dataset::validate() const {
  std::set<std::string_view> names;
  std::array<int, 6> role_count{};
  for (std::size_t c = 0; c < schema_.size(); ++c) {
    const auto& spec = schema_[c];
    if (spec.name.empty()) throw DomainError("dataset: empty column name");
    if (!names.insert(spec.name).second)
      throw DomainError("dataset: duplicate column name '" + spec.name + "'");
    if (columns_[c].size() != n_rows_)
      throw DomainError("dataset: column '" + spec.name + "' has " +
                        std::to_string(columns_[c].size()) + " cells, expected " +
                        std::to_string(n_rows_));
    const int role_index = static_cast<int>(spec.role);
    if (spec.role != ColumnRole::feature && spec.role != ColumnRole::strata &&
        ++role_count[role_index] > 1)
      throw DomainError("dataset: more than one column with role " +
                        std::string(to_string(spec.role)));
    const bool needs_numeric = spec.role == ColumnRole::label ||
                               spec.role == ColumnRole::duration ||
                               spec.role == ColumnRole::event;
    if (needs_numeric && spec.kind != ColumnKind::numeric)
      throw DomainError("dataset: column '" + spec.name + "' with role " +
                        std::string(to_string(spec.role)) + " must be numeric");
    for (double v : columns_[c]) {
      if (is_missing(v)) continue;
      if (spec.kind == ColumnKind::categorical) {
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(spec.vocabulary.size()))
          throw DomainError("dataset: column '" + spec.name + "' holds a code outside its vocabulary");
        continue;
      }
      if (!std::isfinite(v))
        throw DomainError("dataset: column '" + spec.name + "' holds a non-finite value");
      if ((spec.role == ColumnRole::label || spec.role == ColumnRole::event) && v != 0.0 && v != 1.0)
        throw DomainError("dataset: column '" + spec.name + "' must be binary, found " +
                          format_number(v));
      if (spec.role == ColumnRole::duration && !(v > 0.0))
        throw DomainError("dataset: duration column '" + spec.name +
                          "' must be strictly positive, found " + format_number(v));
    }
  }
}

const std::string& Dataset::level(std::size_t row, std::size_t col) const {
  static const std::string empty;
  const double v = columns_.at(col).at(row);
  if (is_missing(v) || schema_[col].kind != ColumnKind::categorical) return empty;
  return schema_[col].vocabulary[static_cast<std::size_t>(v)];
}

std::optional<std::size_t> Dataset::find(std::string_view name) const {
  for (std::size_t c = 0; c < schema_.size(); ++c)
    if (schema_[c].name == name) return c;
  return std::nullopt;
}

std::size_t Dataset::index_of(std::string_view name) const {
  if (auto c = find(name)) return *c;
  throw DomainError("dataset: no column named '" + std::string(name) + "'");
}

std::optional<std::size_t> Dataset::role_column(ColumnRole role) const {
  for (std::size_t c = 0; c < schema_.size(); ++c)
    if (schema_[c].role == role) return c;
  return std::nullopt;
}

std::vector<std::size_t> Dataset::columns_with_role(ColumnRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < schema_.size(); ++c)
    if (schema_[c].role == role) out.push_back(c);
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> cols(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    cols[c].reserve(rows.size());
    for (std::size_t r : rows) cols[c].push_back(columns_[c].at(r));
  }
  return Dataset(schema_, std::move(cols));
}

Dataset Dataset::select_columns(std::span<const std::size_t> cols) const {
  Schema schema;
  std::vector<std::vector<double>> data;
  for (std::size_t c : cols) {
    schema.push_back(schema_.at(c));
    data.push_back(columns_[c]);
  }
  Dataset out(std::move(schema), std::move(data));
  out.n_rows_ = n_rows_;
  return out;
}

Dataset Dataset::with_column(ColumnSpec spec, std::vector<double> values) const {
  Schema schema = schema_;
  auto data = columns_;
  schema.push_back(std::move(spec));
  data.push_back(std::move(values));
  return Dataset(std::move(schema), std::move(data));
}

Dataset Dataset::append_rows(const Dataset& other) const {
  if (schema_ != other.schema_) throw DomainError("dataset: cannot append rows with a different schema");
  auto data = columns_;
  for (std::size_t c = 0; c < data.size(); ++c)
    data[c].insert(data[c].end(), other.columns_[c].begin(), other.columns_[c].end());
  return Dataset(schema_, std::move(data));
}

bool Dataset::operator==(const Dataset& other) const {
  if (schema_ != other.schema_ || n_rows_ != other.n_rows_) return false;
  for (std::size_t c = 0; c < columns_.size(); ++c)
    for (std::size_t r = 0; r < n_rows_; ++r)
      if (!bits_equal(columns_[c][r], other.columns_[c][r])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Schema sidecar

Schema parse_schema(std::istream& in) {
  Schema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("schema line " + std::to_string(line_no) + ": expected 'name = kind,role'");
    ColumnSpec spec;
    spec.name = std::string(trim(text.substr(0, eq)));
    const auto rest = trim(text.substr(eq + 1));
    auto parts = split(rest, ',');
    if (parts.size() < 2 || parts.size() > 3 || spec.name.empty())
      throw ParseError("schema line " + std::to_string(line_no) + ": expected 'name = kind,role[,codes]'");
    spec.kind = parse_column_kind(trim(parts[0]));
    spec.role = parse_column_role(trim(parts[1]));
    if (parts.size() == 3) {
      if (spec.kind != ColumnKind::categorical)
        throw ParseError("schema line " + std::to_string(line_no) + ": codes given for numeric column '" +
                         spec.name + "'");
      for (auto code : split(trim(parts[2]), '|')) {
        const auto c = trim(code);
        if (c.empty() || c == "NA")
          throw ParseError("schema line " + std::to_string(line_no) + ": invalid category code");
        spec.vocabulary.emplace_back(c);
      }
    }
    schema.push_back(std::move(spec));
  }
  return schema;
}

Schema read_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  try {
    return parse_schema(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string format_schema(const Schema& schema) {
  std::ostringstream out;
  for (const auto& spec : schema) {
    out << spec.name << " = " << to_string(spec.kind) << ',' << to_string(spec.role);
    if (spec.kind == ColumnKind::categorical && spec.role != ColumnRole::id && !spec.vocabulary.empty()) {
      out << ',';
      for (std::size_t i = 0; i < spec.vocabulary.size(); ++i) out << (i ? "|" : "") << spec.vocabulary[i];
    }
    out << '\n';
  }
  return out.str();
}

void write_schema(const Schema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schema file " + path.string());
  out << format_schema(schema);
  if (!out) throw IoError("failed writing schema file " + path.string());
}

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

Dataset read_csv(std::istream& in, const Schema& schema, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // Tolerate a UTF-8 byte order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split(line, options.separator);
  if (header.size() != schema.size())
    throw ParseError("csv: header has " + std::to_string(header.size()) + " fields, schema has " +
                     std::to_string(schema.size()));
  for (std::size_t c = 0; c < schema.size(); ++c)
    if (trim(header[c]) != schema[c].name)
      throw ParseError("csv: header field " + std::to_string(c + 1) + " is '" +
                       std::string(trim(header[c])) + "', schema expects '" + schema[c].name + "'");

  Schema out_schema = schema;
  std::vector<std::map<std::string, std::size_t, std::less<>>> lookup(schema.size());
  std::vector<bool> open(schema.size(), false);
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].kind != ColumnKind::categorical) continue;
    open[c] = schema[c].vocabulary.empty();
    for (std::size_t i = 0; i < schema[c].vocabulary.size(); ++i) lookup[c][schema[c].vocabulary[i]] = i;
  }

  std::vector<std::vector<double>> cols(schema.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = split(line, options.separator);
    if (fields.size() != schema.size())
      throw ParseError("csv row " + std::to_string(row) + ": expected " + std::to_string(schema.size()) +
                       " fields, got " + std::to_string(fields.size()));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto field = trim(fields[c]);
      if (is_missing_token(field)) {
        cols[c].push_back(kMissing);
        continue;
      }
      if (schema[c].kind == ColumnKind::numeric) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
          throw ParseError("csv row " + std::to_string(row) + ": column '" + schema[c].name +
                           "' expects a number, got '" + std::string(field) + "'");
        cols[c].push_back(v);
        continue;
      }
      auto it = lookup[c].find(field);
      if (it == lookup[c].end()) {
        if (!open[c])
          throw DomainError("csv row " + std::to_string(row) + ": value '" + std::string(field) +
                            "' is not in the vocabulary of column '" + schema[c].name + "'");
        it = lookup[c].emplace(std::string(field), out_schema[c].vocabulary.size()).first;
        out_schema[c].vocabulary.emplace_back(field);
      }
      cols[c].push_back(static_cast<double>(it->second));
    }
  }
  try {
    return Dataset(std::move(out_schema), std::move(cols));
  } catch (const DomainError& e) {
    throw DomainError(std::string("csv: ") + e.what());
  }
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file " + path.string());
  try {
    return read_csv(in, schema, options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(path.string() + ": " + e.what());
  }
}

void write_csv(const Dataset& data, std::ostream& out, const CsvOptions& options) {
  const auto& schema = data.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? std::string(1, options.separator) : "") << schema[c].name;
  out << '\n';
  for (const auto& spec : schema)
    for (const auto& code : spec.vocabulary)
      if (code.find(options.separator) != std::string::npos || code == "NA" || code.empty())
        throw DomainError("csv: category code '" + code + "' of column '" + spec.name +
                          "' cannot be written unambiguously");
  std::string line;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    line.clear();
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) line.push_back(options.separator);
      const double v = data.cell(r, c);
      if (is_missing(v)) continue;
      if (schema[c].kind == ColumnKind::numeric)
        line += format_number(v);
      else
        line += schema[c].vocabulary[static_cast<std::size_t>(v)];
    }
    line.push_back('\n');
    out << line;
  }
}

void write_csv(const Dataset& data, const std::filesystem::path& path, const CsvOptions& options) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write data file " + path.string());
  write_csv(data, out, options);
  out.flush();
  if (!out) throw IoError("failed writing data file " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

std::string padded(std::string_view prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return std::string(prefix) + digits;
}

std::vector<std::string> categorical_levels(std::size_t which) {
  if (which == 0) return {"C", "G", "M", "J", "F", "I", "L", "N"};
  if (which == 1) return {"MI", "RM", "TO", "BO", "FI", "PD", "BG", "BS", "VR", "GE", "BA", "PA"};
  return {"L1", "L2", "L3", "L4"};
}

std::string categorical_name(std::size_t which) {
  if (which == 0) return "sector";
  if (which == 1) return "location";
  return "cat" + std::to_string(which + 1);
}

// Level k drawn with weight 1 / (k + 1).
std::size_t draw_level(Rng& rng, std::size_t n_levels) {
  double total = 0.0;
  for (std::size_t k = 0; k < n_levels; ++k) total += 1.0 / static_cast<double>(k + 1);
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < n_levels; ++k) {
    u -= 1.0 / static_cast<double>(k + 1);
    if (u < 0.0) return k;
  }
  return n_levels - 1;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (!(spec.minority_fraction > 0.0 && spec.minority_fraction < 0.5))
    throw DomainError("synthetic: minority_fraction must lie in (0, 0.5)");
  if (!(spec.hazard_ratio_true > 0.0)) throw DomainError("synthetic: hazard_ratio_true must be positive");
  if (!(spec.class_separation >= 0.0)) throw DomainError("synthetic: class_separation must be nonnegative");
  if (!(spec.censoring_horizon > 0.0)) throw DomainError("synthetic: censoring_horizon must be positive");
  if (!(spec.baseline_hazard > 0.0)) throw DomainError("synthetic: baseline_hazard must be positive");
  if (!(spec.missing_rate >= 0.0 && spec.missing_rate < 0.5))
    throw DomainError("synthetic: missing_rate must lie in [0, 0.5)");

  const std::size_t n = spec.n_rows;
  Schema schema;
  std::vector<std::vector<double>> cols;

  ColumnSpec id{"firm_id", ColumnKind::categorical, ColumnRole::id, {}};
  std::vector<double> id_col(n);
  for (std::size_t i = 0; i < n; ++i) {
    id.vocabulary.push_back(padded("F", i + 1, 6));
    id_col[i] = static_cast<double>(i);
  }
  schema.push_back(std::move(id));
  cols.push_back(std::move(id_col));

  // Exactly round(fraction * n) positives at random positions.
  std::vector<double> label(n, 0.0);
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed, "synthetic.labels");
    rng.shuffle(std::span<std::size_t>(order));
    const auto positives = static_cast<std::size_t>(std::llround(spec.minority_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < positives && i < n; ++i) label[order[i]] = 1.0;
  }

  std::vector<double> duration(n), event(n);
  {
    Rng rng(spec.seed, "synthetic.survival");
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = spec.baseline_hazard * (label[i] == 1.0 ? spec.hazard_ratio_true : 1.0);
      const double t = rng.exponential(rate);
      if (t > spec.censoring_horizon) {
        duration[i] = spec.censoring_horizon;
        event[i] = 0.0;
      } else {
        duration[i] = t;
        event[i] = 1.0;
      }
    }
  }
  schema.push_back({"inno", ColumnKind::numeric, ColumnRole::label, {}});
  cols.push_back(label);
  schema.push_back({"duration", ColumnKind::numeric, ColumnRole::duration, {}});
  cols.push_back(std::move(duration));
  schema.push_back({"event", ColumnKind::numeric, ColumnRole::event, {}});
  cols.push_back(std::move(event));

  const std::size_t informative = (spec.n_numeric + 1) / 2;
  for (std::size_t j = 0; j < spec.n_numeric; ++j) {
    Rng rng(spec.seed, "synthetic.numeric", j);
    const double shift = j < informative ? spec.class_separation : 0.0;
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = rng.normal() + shift * label[i];
    schema.push_back({padded("x", j + 1, 2), ColumnKind::numeric, ColumnRole::feature, {}});
    cols.push_back(std::move(values));
  }
  for (std::size_t j = 0; j < spec.n_categorical; ++j) {
    Rng rng(spec.seed, "synthetic.categorical", j);
    auto levels = categorical_levels(j);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<double>(draw_level(rng, levels.size()));
    schema.push_back({categorical_name(j), ColumnKind::categorical, ColumnRole::feature, std::move(levels)});
    cols.push_back(std::move(values));
  }

  if (spec.missing_rate > 0.0) {
    const std::size_t first_feature = 4;
    const std::size_t n_features = cols.size() - first_feature;
    for (std::size_t j = 0; j < n_features; ++j) {
      Rng rng(spec.seed, "synthetic.missing", j);
      const double rate =
          spec.missing_rate * 2.0 * static_cast<double>(j + 1) / static_cast<double>(n_features + 1);
      for (double& v : cols[first_feature + j])
        if (rng.bernoulli(rate)) v = kMissing;
    }
  }
  return Dataset(std::move(schema), std::move(cols));
}

// ---------------------------------------------------------------------------
// Summary

DatasetSummary summarize(const Dataset& data) {
  DatasetSummary out;
  out.n_rows = data.n_rows();
  for (std::size_t c = 0; c < data.n_cols(); ++c) {
    const auto& spec = data.spec(c);
    ColumnSummary s;
    s.name = spec.name;
    s.kind = spec.kind;
    std::vector<double> observed;
    for (double v : data.column(c)) {
      if (is_missing(v))
        ++s.missing;
      else
        observed.push_back(v);
    }
    if (spec.kind == ColumnKind::numeric) {
      if (!observed.empty()) {
        const auto [lo, hi] = std::minmax_element(observed.begin(), observed.end());
        s.min = *lo;
        s.max = *hi;
        const auto q = quartiles(observed);
        s.q1 = q.q1;
        s.median = q.q2;
        s.q3 = q.q3;
        s.mean = mean(observed);
      }
    } else {
      std::vector<std::size_t> counts(spec.vocabulary.size(), 0);
      for (double v : observed) ++counts[static_cast<std::size_t>(v)];
      for (std::size_t k = 0; k < counts.size(); ++k) s.frequencies.emplace_back(spec.vocabulary[k], counts[k]);
    }
    out.columns.push_back(std::move(s));
  }
  return out;
}

}  // namespace innosurv
