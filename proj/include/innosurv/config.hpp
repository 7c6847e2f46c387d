#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace innosurv {

// Flat, sectioned key-value settings:
//
//   # comment
//   seed = 7
//   [smote]
//   k = 5
//
// Keys are addressed as "section.key" ("seed" for keys before any section).
// Later assignments win, so command-line overrides are applied with set().
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  // Parses "section.key=value".
  void set_assignment(std::string_view assignment);
  void merge(const Config& overrides);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated, blanks trimmed, empty items skipped.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  // Sections in lexicographic order; round-trips through parse().
  std::string format() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace innosurv
