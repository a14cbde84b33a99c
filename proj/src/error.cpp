#include "earmotion/error.hpp"

namespace earmotion {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io error";
    case Errc::parse: return "parse error";
    case Errc::validation: return "validation error";
    case Errc::bad_magic: return "bad magic";
    case Errc::unsupported_version: return "unsupported version";
    case Errc::truncated: return "truncated payload";
    case Errc::trailing_data: return "trailing data";
    case Errc::unknown_stream: return "unknown stream";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::non_finite: return "non-finite value";
    case Errc::empty_positive_class: return "empty positive class";
    case Errc::no_observable_region: return "no observable ear region";
    case Errc::single_class: return "single class";
  }
  return "error";
}

}  // namespace earmotion
