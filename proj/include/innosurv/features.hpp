#pragma once

#include <span>
#include <string>
#include <vector>

#include "innosurv/dataset.hpp"
#include "innosurv/errors.hpp"

namespace innosurv {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
};

struct FeatureInfo {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> levels;  // categorical only
  std::size_t reference = 0;        // most frequent level in training
};

// The feature columns a classifier was trained on. Binding a dataset maps its
// columns by name and re-indexes categorical codes into the training levels;
// levels unseen in training fall back to the reference level.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureInfo> features) : features_(std::move(features)) {}

  static FeatureSchema from_training(const Dataset& train);

  const std::vector<FeatureInfo>& features() const noexcept { return features_; }
  std::size_t size() const noexcept { return features_.size(); }

  // Raw matrix: numeric values, or level indices for categorical features.
  Matrix bind(const Dataset& data, Warnings* warnings = nullptr) const;

  // Numeric features as-is, then one 0/1 column per non-reference level.
  std::size_t encoded_width() const;
  std::vector<std::string> encoded_names() const;
  void encode_row(std::span<const double> raw, std::span<double> out) const;
  Matrix encode(const Matrix& raw) const;

  bool operator==(const FeatureSchema& other) const;

 private:
  std::vector<FeatureInfo> features_;
};

// Label column as 0/1 integers; throws if absent or incomplete.
std::vector<int> binary_labels(const Dataset& data);

}  // namespace innosurv
