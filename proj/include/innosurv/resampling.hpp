#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "innosurv/dataset.hpp"

namespace innosurv {

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

struct SplitResult {
  Dataset train;
  Dataset test;
  // Original row indices, ascending.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

// Unstratified uniform holdout; |train| = round(train_fraction * n), clamped
// so neither side is empty. Row order is preserved within each side.
SplitResult split(const Dataset& data, const SplitSpec& spec);

struct SmoteSpec {
  std::size_t k = 5;
  // Synthetic minority rows to add, as a percentage of the minority count.
  // The fractional part of over_pct / 100 is realised by a random subset of seeds.
  int over_pct = 200;
  // Majority rows kept, as a percentage of the synthetic count (capped at
  // the available majority rows, drawn without replacement).
  int under_pct = 200;
  std::uint64_t seed = 1;
};

struct SyntheticOrigin {
  std::size_t seed_row = 0;      // row index in the input dataset
  std::size_t neighbor_row = 0;  // row index in the input dataset
  double gap = 0.0;              // interpolation weight in (0, 1)
};

struct SmoteResult {
  // Kept majority rows, then all minority rows (input order), then the
  // synthetic rows.
  Dataset data;
  double minority_label = 1.0;
  std::size_t n_majority_kept = 0;
  std::size_t n_minority = 0;
  // One entry per synthetic row, in output order.
  std::vector<SyntheticOrigin> origins;
};

// The k nearest minority neighbours of each minority row, by Euclidean
// distance on numeric features standardized over the minority rows. Ties go
// to the lower row index. Indices are positions in `minority_rows`.
std::vector<std::vector<std::size_t>> minority_neighbors(const Dataset& data,
                                                         const std::vector<std::size_t>& minority_rows,
                                                         std::size_t k);

// Synthetic rows take seed + gap * (neighbor - seed) on numeric features and
// copy categorical features from the seed; id, duration and event cells are
// left missing. Apply to the training partition only.
SmoteResult smote(const Dataset& train, const SmoteSpec& spec);

}  // namespace innosurv
