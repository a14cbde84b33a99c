#include "earmotion/flat_toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "earmotion/binary_io.hpp"
#include "earmotion/error.hpp"

namespace earmotion {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool parse_number(std::string_view s, double& out) {
  std::string cleaned;
  for (char ch : s)
    if (ch != '_') cleaned.push_back(ch);
  if (!cleaned.empty() && cleaned.front() == '+') cleaned.erase(0, 1);
  const auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), out);
  return ec == std::errc{} && ptr == cleaned.data() + cleaned.size();
}

[[noreturn]] void bad(std::size_t line_no, const std::string& what) {
  fail(Errc::parse, "config line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

FlatToml FlatToml::parse(std::string_view text) {
  FlatToml doc;
  std::string table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') bad(line_no, "unterminated table header");
      table = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) bad(line_no, "expected key = value");
    const std::string key = std::string(trim(line.substr(0, eq)));
    const std::string_view raw = trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) bad(line_no, "empty key or value");
    const std::string full = table.empty() ? key : table + "." + key;

    Value value;
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') bad(line_no, "unterminated string");
      value = std::string(raw.substr(1, raw.size() - 2));
    } else if (raw == "true" || raw == "false") {
      value = raw == "true";
    } else if (raw.front() == '[') {
      if (raw.back() != ']') bad(line_no, "arrays must fit on one line");
      std::vector<double> items;
      std::string_view body = raw.substr(1, raw.size() - 2);
      while (!trim(body).empty()) {
        const auto comma = body.find(',');
        const auto item = trim(body.substr(0, comma));
        if (!item.empty()) {
          double v = 0;
          if (!parse_number(item, v)) bad(line_no, "arrays may only contain numbers");
          items.push_back(v);
        }
        if (comma == std::string_view::npos) break;
        body.remove_prefix(comma + 1);
      }
      value = std::move(items);
    } else {
      double v = 0;
      if (!parse_number(raw, v)) bad(line_no, "unrecognised value '" + std::string(raw) + "'");
      value = v;
    }
    doc.values_[full] = std::move(value);
    doc.raw_[full] = std::string(raw);
  }
  return doc;
}

FlatToml FlatToml::load(const std::filesystem::path& path) { return parse(detail::read_file(path)); }

double FlatToml::number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<double>(&it->second)) return *v;
  fail(Errc::parse, "config key '" + key + "' must be a number");
}

std::int64_t FlatToml::integer(const std::string& key, std::int64_t fallback) const {
  const auto it = raw_.find(key);
  if (it == raw_.end()) return fallback;
  std::int64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(Errc::parse, "config key '" + key + "' must be an integer");
  return v;
}

std::uint64_t FlatToml::unsigned_integer(const std::string& key, std::uint64_t fallback) const {
  const auto it = raw_.find(key);
  if (it == raw_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(Errc::parse, "config key '" + key + "' must be an unsigned integer");
  return v;
}

bool FlatToml::boolean(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<bool>(&it->second)) return *v;
  fail(Errc::parse, "config key '" + key + "' must be a boolean");
}

std::string FlatToml::string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
  fail(Errc::parse, "config key '" + key + "' must be a string");
}

std::vector<double> FlatToml::numbers(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
  if (const auto* v = std::get_if<double>(&it->second)) return {*v};
  fail(Errc::parse, "config key '" + key + "' must be a number array");
}

}  // namespace earmotion
