#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace earmotion {

enum class Errc {
  io,
  parse,
  validation,
  bad_magic,
  unsupported_version,
  truncated,
  trailing_data,
  unknown_stream,
  dimension_mismatch,
  non_finite,
  empty_positive_class,
  no_observable_region,
  single_class,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure in the library is reported as an Error carrying an Errc so
/// callers (and the CLI exit status) can tell the failure classes apart.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(Errc::validation, message);
}

}  // namespace earmotion
