#pragma once

// Locale-independent number formatting and parsing.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace amda::text {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
/// Fixed number of decimals, for human-readable tables.
std::string format_fixed(double v, int decimals);

/// Strict parsers: the whole (trimmed) field must be consumed. Throw
/// ConfigError mentioning `what` on failure.
double parse_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);
std::uint64_t parse_uint(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::string_view trim(std::string_view s);
/// Splits on `sep`, trimming each field; an empty input gives no fields.
std::vector<std::string> split(std::string_view s, char sep);

std::vector<double> parse_double_list(std::string_view s, std::string_view what);
std::vector<std::uint64_t> parse_uint_list(std::string_view s, std::string_view what);

template <class Range, class Fmt>
std::string join(const Range& items, std::string_view sep, Fmt fmt) {
  std::string out;
  bool first = true;
  for (const auto& item : items) {
    if (!first) out += sep;
    out += fmt(item);
    first = false;
  }
  return out;
}

}  // namespace amda::text
