#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace earmotion {

/// Reader for the flat subset of TOML used by the config files: `[table]`
/// headers, `key = value` pairs with strings, booleans, numbers and arrays
/// of numbers, and `#` comments. Keys are addressed as "table.key".
class FlatToml {
 public:
  using Value = std::variant<std::string, bool, double, std::vector<double>>;

  static FlatToml parse(std::string_view text);
  static FlatToml load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double number(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, Value>& values() const noexcept { return values_; }

 private:
  std::map<std::string, Value> values_;
  std::map<std::string, std::string> raw_;
};

}  // namespace earmotion
