#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "innosurv/dataset.hpp"
#include "innosurv/rng.hpp"

namespace fixtures {

using innosurv::ColumnKind;
using innosurv::ColumnRole;
using innosurv::ColumnSpec;
using innosurv::Dataset;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("innosurv-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ColumnSpec numeric(const std::string& name, ColumnRole role = ColumnRole::feature) {
  return {name, ColumnKind::numeric, role, {}};
}

inline ColumnSpec categorical(const std::string& name, std::vector<std::string> levels,
                              ColumnRole role = ColumnRole::feature) {
  return {name, ColumnKind::categorical, role, std::move(levels)};
}

// Numeric features x1..xk plus a label column "y".
inline Dataset labelled(const std::vector<std::vector<double>>& features, const std::vector<double>& labels) {
  innosurv::Schema schema;
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < features.size(); ++j) {
    schema.push_back(numeric("x" + std::to_string(j + 1)));
    cols.push_back(features[j]);
  }
  schema.push_back(numeric("y", ColumnRole::label));
  cols.push_back(labels);
  return Dataset(std::move(schema), std::move(cols));
}

inline std::vector<double> uniform_vector(innosurv::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

// Labels with both classes present.
inline std::vector<int> two_class_labels(innosurv::Rng& rng, std::size_t n, double p = 0.5) {
  std::vector<int> y(n);
  do {
    for (auto& v : y) v = rng.bernoulli(p) ? 1 : 0;
  } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);
  return y;
}

}  // namespace fixtures
