#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lagsim {

/// Flat view of a small TOML subset: `[section]` headers, `key = value`
/// with strings, integers, floats, booleans, and single-line arrays of
/// those. Keys are stored as "section.key".
class ConfigTable {
 public:
  using Scalar = std::variant<std::string, double, bool>;
  using Value = std::variant<Scalar, std::vector<Scalar>>;

  static ConfigTable parse(std::string_view text);
  static ConfigTable load(const std::string& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::string get_string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;
  double get_number(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = std::nullopt) const;
  std::vector<double> get_numbers(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
  const std::map<std::string, Value>& values() const { return values_; }

 private:
  std::map<std::string, Value> values_;
};

std::string read_file(const std::string& path);
/// Writes via a temporary file and rename.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace lagsim
