#include "amda/text.hpp"

#include <charconv>
#include <cmath>

#include "amda/error.hpp"

namespace amda::text {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

namespace {

template <class T>
T parse_number(std::string_view s, std::string_view what, const char* kind) {
  const std::string_view t = trim(s);
  T v{};
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ConfigError(std::string(what) + ": expected " + kind + ", got '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

double parse_double(std::string_view s, std::string_view what) {
  const double v = parse_number<double>(s, what, "a number");
  if (!std::isfinite(v)) throw ConfigError(std::string(what) + ": value must be finite");
  return v;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  return parse_number<std::int64_t>(s, what, "an integer");
}

std::uint64_t parse_uint(std::string_view s, std::string_view what) {
  return parse_number<std::uint64_t>(s, what, "a non-negative integer");
}

bool parse_bool(std::string_view s, std::string_view what) {
  const std::string_view t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(std::string(what) + ": expected true or false, got '" + std::string(s) + "'");
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (const std::string& f : split(s, ',')) out.push_back(parse_double(f, what));
  return out;
}

std::vector<std::uint64_t> parse_uint_list(std::string_view s, std::string_view what) {
  std::vector<std::uint64_t> out;
  for (const std::string& f : split(s, ',')) out.push_back(parse_uint(f, what));
  return out;
}

}  // namespace amda::text
