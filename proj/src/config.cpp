#include "lagsim/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "lagsim/error.hpp"

namespace lagsim {
namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

ConfigTable::Scalar parse_scalar(const std::string& raw, std::size_t line) {
  std::string v = trim(raw);
  if (v.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("line " + std::to_string(line) + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        char n = v[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    std::size_t used = 0;
    std::string cleaned;
    for (char c : v)
      if (c != '_') cleaned += c;
    double d = std::stod(cleaned, &used);
    if (used != cleaned.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + v + "'");
  }
}

std::vector<std::string> split_array(const std::string& body) {
  std::vector<std::string> items;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      items.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(cur);
  return items;
}

}  // namespace

ConfigTable ConfigTable::parse(std::string_view text) {
  ConfigTable t;
  std::istringstream in{std::string(text)};
  std::string raw, section;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') throw ConfigError("line " + std::to_string(line) + ": arrays must fit on one line");
      std::vector<Scalar> items;
      for (const auto& item : split_array(value.substr(1, value.size() - 2))) items.push_back(parse_scalar(item, line));
      t.values_[key] = std::move(items);
    } else {
      t.values_[key] = parse_scalar(value, line);
    }
  }
  return t;
}

ConfigTable ConfigTable::load(const std::string& path) { return parse(read_file(path)); }

namespace {
template <typename T>
T scalar_as(const std::map<std::string, ConfigTable::Value>& values, const std::string& key, std::optional<T> fallback,
            const char* type) {
  auto it = values.find(key);
  if (it == values.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing config key '" + key + "'");
  }
  const auto* s = std::get_if<ConfigTable::Scalar>(&it->second);
  if (!s || !std::holds_alternative<T>(*s)) throw ConfigError("config key '" + key + "' must be a " + type);
  return std::get<T>(*s);
}
}  // namespace

std::string ConfigTable::get_string(const std::string& key, std::optional<std::string> fallback) const {
  return scalar_as<std::string>(values_, key, std::move(fallback), "string");
}

double ConfigTable::get_number(const std::string& key, std::optional<double> fallback) const {
  return scalar_as<double>(values_, key, fallback, "number");
}

bool ConfigTable::get_bool(const std::string& key, std::optional<bool> fallback) const {
  return scalar_as<bool>(values_, key, fallback, "boolean");
}

std::vector<double> ConfigTable::get_numbers(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  std::vector<double> out;
  if (const auto* arr = std::get_if<std::vector<Scalar>>(&it->second)) {
    for (const auto& s : *arr) {
      if (!std::holds_alternative<double>(s)) throw ConfigError("config key '" + key + "' must hold numbers");
      out.push_back(std::get<double>(s));
    }
    return out;
  }
  return {get_number(key)};
}

std::vector<std::string> ConfigTable::get_strings(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  std::vector<std::string> out;
  if (const auto* arr = std::get_if<std::vector<Scalar>>(&it->second)) {
    for (const auto& s : *arr) {
      if (!std::holds_alternative<std::string>(s)) throw ConfigError("config key '" + key + "' must hold strings");
      out.push_back(std::get<std::string>(s));
    }
    return out;
  }
  return {get_string(key)};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += "." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

}  // namespace lagsim
