#include "innosurv/features.hpp"

#include <algorithm>
#include <map>

namespace innosurv {

FeatureSchema FeatureSchema::from_training(const Dataset& train) {
  std::vector<FeatureInfo> features;
  for (std::size_t c = 0; c < train.n_cols(); ++c) {
    const auto& spec = train.spec(c);
    if (spec.role != ColumnRole::feature) continue;
    FeatureInfo info{spec.name, spec.kind, {}, 0};
    if (spec.kind == ColumnKind::categorical) {
      info.levels = spec.vocabulary;
      std::vector<std::size_t> counts(info.levels.size(), 0);
      for (double v : train.column(c))
        if (!is_missing(v)) ++counts[static_cast<std::size_t>(v)];
      if (!counts.empty())
        info.reference = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      if (info.levels.empty())
        throw DomainError("feature '" + spec.name + "' is categorical with an empty vocabulary");
    }
    features.push_back(std::move(info));
  }
  if (features.empty()) throw DomainError("training data has no feature columns");
  return FeatureSchema(std::move(features));
}

Matrix FeatureSchema::bind(const Dataset& data, Warnings* warnings) const {
  Matrix raw(data.n_rows(), features_.size());
  for (std::size_t j = 0; j < features_.size(); ++j) {
    const auto& f = features_[j];
    const auto col = data.find(f.name);
    if (!col) throw DomainError("data lacks feature column '" + f.name + "' required by the model");
    const auto& spec = data.spec(*col);
    if (spec.kind != f.kind)
      throw DomainError("feature column '" + f.name + "' is " + std::string(to_string(spec.kind)) +
                        " but the model expects " + std::string(to_string(f.kind)));
    std::vector<std::size_t> remap;
    std::vector<bool> unseen;
    if (f.kind == ColumnKind::categorical) {
      std::map<std::string_view, std::size_t> index;
      for (std::size_t k = 0; k < f.levels.size(); ++k) index[f.levels[k]] = k;
      for (const auto& code : spec.vocabulary) {
        auto it = index.find(code);
        unseen.push_back(it == index.end());
        remap.push_back(it == index.end() ? f.reference : it->second);
      }
    }
    std::vector<bool> warned(remap.size(), false);
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
      const double v = data.cell(r, *col);
      if (is_missing(v))
        throw DomainError("feature '" + f.name + "' is missing in row " + std::to_string(r + 1));
      if (f.kind == ColumnKind::numeric) {
        raw(r, j) = v;
        continue;
      }
      const auto code = static_cast<std::size_t>(v);
      raw(r, j) = static_cast<double>(remap[code]);
      if (unseen[code] && !warned[code]) {
        warned[code] = true;
        warn(warnings, "feature '" + f.name + "': level '" + spec.vocabulary[code] +
                           "' unseen in training, mapped to reference level '" + f.levels[f.reference] + "'");
      }
    }
  }
  return raw;
}

std::size_t FeatureSchema::encoded_width() const {
  std::size_t w = 0;
  for (const auto& f : features_) w += f.kind == ColumnKind::numeric ? 1 : f.levels.size() - 1;
  return w;
}

std::vector<std::string> FeatureSchema::encoded_names() const {
  std::vector<std::string> names;
  for (const auto& f : features_) {
    if (f.kind == ColumnKind::numeric) {
      names.push_back(f.name);
      continue;
    }
    for (std::size_t k = 0; k < f.levels.size(); ++k)
      if (k != f.reference) names.push_back(f.name + "[" + f.levels[k] + "]");
  }
  return names;
}

void FeatureSchema::encode_row(std::span<const double> raw, std::span<double> out) const {
  std::size_t pos = 0;
  for (std::size_t j = 0; j < features_.size(); ++j) {
    const auto& f = features_[j];
    if (f.kind == ColumnKind::numeric) {
      out[pos++] = raw[j];
      continue;
    }
    const auto level = static_cast<std::size_t>(raw[j]);
    for (std::size_t k = 0; k < f.levels.size(); ++k)
      if (k != f.reference) out[pos++] = level == k ? 1.0 : 0.0;
  }
}

Matrix FeatureSchema::encode(const Matrix& raw) const {
  Matrix out(raw.rows, encoded_width());
  for (std::size_t r = 0; r < raw.rows; ++r) encode_row(raw.row(r), out.row(r));
  return out;
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
  if (features_.size() != other.features_.size()) return false;
  for (std::size_t j = 0; j < features_.size(); ++j) {
    const auto& a = features_[j];
    const auto& b = other.features_[j];
    if (a.name != b.name || a.kind != b.kind || a.levels != b.levels || a.reference != b.reference) return false;
  }
  return true;
}

std::vector<int> binary_labels(const Dataset& data) {
  const auto label = data.role_column(ColumnRole::label);
  if (!label) throw DomainError("dataset has no label column");
  std::vector<int> y;
  y.reserve(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    const double v = data.cell(r, *label);
    if (is_missing(v)) throw DomainError("label is missing in row " + std::to_string(r + 1));
    y.push_back(v == 1.0 ? 1 : 0);
  }
  return y;
}

}  // namespace innosurv
