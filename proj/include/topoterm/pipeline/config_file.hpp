#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace topoterm {

// Subset of TOML: [section] headers, `key = value` lines and # comments.
// Values are basic strings, integers, floats, booleans and arrays of strings.
using ConfigValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;

class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text, const std::string& source = "<memory>");
  static ConfigDocument load(const std::filesystem::path& path);

  // Keys are "section.key", or just "key" before any section header.
  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, ConfigValue>& values() const { return values_; }

  // Typed getters; throw ValidationError naming the key on a type mismatch.
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;  // accepts integers
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<std::string>> get_strings(const std::string& key) const;

  // Keys never read by any getter; used to flag typos.
  std::vector<std::string> unread_keys() const;

 private:
  std::map<std::string, ConfigValue> values_;
  mutable std::map<std::string, bool> read_;
  std::string source_;
};

}  // namespace topoterm
