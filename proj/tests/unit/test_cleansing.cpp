#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "innosurv/cleansing.hpp"
#include "innosurv/stats.hpp"

using namespace innosurv;
using fixtures::numeric;

namespace {

// n_rows x counts.size() numeric features; column j has counts[j] missing
// cells in its first rows.
Dataset with_column_gaps(std::size_t n_rows, const std::vector<std::size_t>& counts) {
  Schema schema;
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    schema.push_back(numeric("c" + std::to_string(j)));
    std::vector<double> col(n_rows, 1.0);
    for (std::size_t r = 0; r < counts[j]; ++r) col[r] = kMissing;
    cols.push_back(col);
  }
  return Dataset(schema, cols);
}

// 4x4: row r has r missing cells, in its first r columns.
Dataset staircase() {
  Schema schema;
  std::vector<std::vector<double>> cols(4, std::vector<double>(4, 1.0));
  for (std::size_t j = 0; j < 4; ++j) schema.push_back(numeric("c" + std::to_string(j)));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < r; ++j) cols[j][r] = kMissing;
  return Dataset(schema, cols);
}

double label_ratio(const Dataset& d) {
  const auto y = *d.role_column(ColumnRole::label);
  double pos = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < d.n_rows(); ++r)
    if (!d.missing(r, y)) {
      pos += d.cell(r, y);
      ++n;
    }
  return pos / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("cleansing") {
  TEST_CASE("complete data profiles to zero everywhere") {
    const auto p = profile_missing(with_column_gaps(5, {0, 0, 0}));
    for (const auto& [name, count] : p.per_column_na) CHECK(count == 0);
    for (auto c : p.per_row_na) CHECK(c == 0);
    CHECK(p.row_quartiles.q3 == 0.0);
  }

  TEST_CASE("4x4 staircase: row quartiles 0.75 / 1.5 / 2.25") {
    const auto p = profile_missing(staircase());
    CHECK(p.per_row_na == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(p.row_quartiles.q1 == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p.row_quartiles.q2 == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(p.row_quartiles.q3 == doctest::Approx(2.25).epsilon(1e-15));
    CHECK(p.row_quartiles.q1 <= p.row_quartiles.q2);
    CHECK(p.row_quartiles.q2 <= p.row_quartiles.q3);
  }

  TEST_CASE("an all-missing column counts every row") {
    const auto p = profile_missing(with_column_gaps(6, {0, 6}));
    CHECK(p.per_column_na[1].second == 6);
  }

  TEST_CASE("rows strictly above Q3 are dropped") {
    // Row NA counts {0,1,2,100}: Q3 = 2 + 0.25 * 98 = 26.5
    const std::size_t cols = 101;
    Schema schema;
    std::vector<std::vector<double>> data(cols, std::vector<double>(4, 1.0));
    for (std::size_t j = 0; j < cols; ++j) schema.push_back(numeric("c" + std::to_string(j)));
    const std::size_t counts[] = {0, 1, 2, 100};
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t j = 0; j < counts[r]; ++j) data[j][r] = kMissing;
    const Dataset d(schema, data);
    const auto p = profile_missing(d);
    CHECK(p.row_quartiles.q3 == doctest::Approx(26.5).epsilon(1e-15));
    const auto kept = drop_rows_above_row_quartile(d, p);
    CHECK(kept.n_rows() == 3);
    CHECK(kept == d.select_rows(std::vector<std::size_t>{0, 1, 2}));
  }

  TEST_CASE("uniform row counts drop nothing") {
    Schema schema{numeric("a"), numeric("b")};
    const Dataset d(schema, {{kMissing, 1.0, kMissing}, {1.0, kMissing, 1.0}});
    CHECK(drop_rows_above_row_quartile(d, profile_missing(d)).n_rows() == 3);
  }

  TEST_CASE("columns strictly above Q1 are dropped") {
    // Column NA counts {0,10,20,30}: Q1 = 7.5
    const auto d = with_column_gaps(30, {0, 10, 20, 30});
    const auto p = profile_missing(d);
    CHECK(p.column_quartiles.q1 == doctest::Approx(7.5).epsilon(1e-15));
    const auto kept = drop_cols_above_col_quartile(d, p);
    REQUIRE(kept.n_cols() == 1);
    CHECK(kept.spec(0).name == "c0");
  }

  TEST_CASE("role-exempt columns survive the column drop and do not move the quartiles") {
    auto d = with_column_gaps(8, {0, 0, 0, 0});
    std::vector<double> y(8, 1.0);
    for (int r = 0; r < 7; ++r) y[r] = kMissing;
    y[0] = 0.0;
    d = d.with_column(numeric("y", ColumnRole::label), y);
    const auto p = profile_missing(d);
    CHECK(p.column_quartiles.q3 == 0.0);
    const auto kept = drop_cols_above_col_quartile(d, p);
    CHECK(kept.find("y").has_value());
  }

  TEST_CASE("harmonize drops columns above the threshold in either sample") {
    const auto a = with_column_gaps(10, {0, 0, 3});
    const auto b = with_column_gaps(10, {4, 0, 0});
    // c0: 40% in b, dropped from both; c2: exactly 30% in a, kept.
    const auto [ha, hb] = harmonize(a, b, 0.30);
    REQUIRE(ha.n_cols() == 2);
    CHECK(ha.spec(0).name == "c1");
    CHECK(ha.spec(1).name == "c2");
    CHECK(ha.schema() == hb.schema());
  }

  TEST_CASE("harmonize leaves identical complete samples alone and rejects disjoint ones") {
    const auto a = with_column_gaps(5, {0, 0});
    const auto [ha, hb] = harmonize(a, a);
    CHECK(ha == a);
    CHECK(hb == a);
    const Dataset other({numeric("z")}, {{1.0}});
    CHECK_THROWS_AS(harmonize(a, other), DomainError);
  }

  TEST_CASE("drop_incomplete_rows: removal, idempotence and the emptied flag") {
    const Dataset d({numeric("a"), numeric("b")}, {{1.0, kMissing, 3.0}, {1.0, 2.0, 3.0}});
    const auto once = drop_incomplete_rows(d);
    CHECK(once.data.n_rows() == 2);
    CHECK_FALSE(once.emptied);
    CHECK(drop_incomplete_rows(once.data).data == once.data);
    CHECK(drop_incomplete_rows(with_column_gaps(4, {0, 0})).data == with_column_gaps(4, {0, 0}));

    const auto all = drop_incomplete_rows(with_column_gaps(3, {3, 0}));
    CHECK(all.data.n_rows() == 0);
    CHECK(all.emptied);
  }

  TEST_CASE("staircase chain: thresholds are the hand quantiles at every stage") {
    const auto d = staircase();
    const auto result = run_mva(d, std::nullopt);
    const auto& stages = result.report.primary;
    // Without a second sample there is no harmonization stage.
    REQUIRE(stages.size() == 3);
    CHECK(stages[2].name == "drop_incomplete_rows");
    CHECK(*stages[0].threshold == doctest::Approx(2.25).epsilon(1e-15));
    CHECK(stages[0].rows_out == 3);  // the 3-NA row exceeds 2.25
    // Re-profiled column counts {2,1,0,0}: Q1 = 0, so c0 and c1 go.
    CHECK(*stages[1].threshold == 0.0);
    CHECK(stages[1].dropped_columns == std::vector<std::string>{"c0", "c1"});
    CHECK(result.primary.n_rows() == 3);
    CHECK(result.primary.n_cols() == 2);
  }

  TEST_CASE("every stage is monotone in rows and columns") {
    SyntheticSpec spec;
    spec.n_rows = 3000;
    spec.missing_rate = 0.05;
    spec.seed = 4;
    const auto a = generate_synthetic(spec);
    spec.seed = 5;
    const auto b = generate_synthetic(spec);
    const auto result = run_mva(a, b);
    for (const auto* list : {&result.report.primary, &result.report.secondary})
      for (const auto& s : *list) {
        CHECK(s.rows_out <= s.rows_in);
        CHECK(s.cols_out <= s.cols_in);
      }
    CHECK(result.primary.schema() == result.secondary->schema());
    CHECK(profile_missing(result.primary).row_quartiles.q3 == 0.0);
  }

  TEST_CASE("label-independent missingness keeps the class ratio within 3 points") {
    for (std::uint64_t seed : {1, 2, 3}) {
      SyntheticSpec spec;
      spec.n_rows = 6000;
      spec.missing_rate = 0.08;
      spec.seed = seed;
      const auto d = generate_synthetic(spec);
      const auto result = run_mva(d, std::nullopt);
      CHECK(std::abs(label_ratio(result.primary) - label_ratio(d)) <= 0.03);
      CHECK(*result.report.primary_class_ratio_before == doctest::Approx(label_ratio(d)));
    }
  }
}
