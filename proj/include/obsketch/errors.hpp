#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace obsketch {

// Machine-readable error categories. The CLI maps these to exit codes and
// prints the category name so callers can dispatch on it.
enum class ErrorCategory {
  invalid_argument = 2,
  no_compression = 3,
  index_out_of_range = 4,
  dimension_mismatch = 5,
  non_finite = 6,
  incompatible = 7,
  bad_magic = 8,
  version_mismatch = 9,
  truncated = 10,
  parse = 11,
  io = 12,
  undefined_ratio = 13,
  infinite_ratio = 14,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::no_compression: return "no_compression";
    case ErrorCategory::index_out_of_range: return "index_out_of_range";
    case ErrorCategory::dimension_mismatch: return "dimension_mismatch";
    case ErrorCategory::non_finite: return "non_finite";
    case ErrorCategory::incompatible: return "incompatible";
    case ErrorCategory::bad_magic: return "bad_magic";
    case ErrorCategory::version_mismatch: return "version_mismatch";
    case ErrorCategory::truncated: return "truncated";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::io: return "io";
    case ErrorCategory::undefined_ratio: return "undefined_ratio";
    case ErrorCategory::infinite_ratio: return "infinite_ratio";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCategory c, const std::string& msg) {
  throw Error(c, msg);
}

inline void require(bool cond, ErrorCategory c, const char* msg) {
  if (!cond) [[unlikely]] fail(c, msg);
}

inline void require(bool cond, ErrorCategory c, const std::string& msg) {
  if (!cond) [[unlikely]] fail(c, msg);
}

}  // namespace detail
}  // namespace obsketch
