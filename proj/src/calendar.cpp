#include "amda/calendar.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "amda/error.hpp"

namespace amda::calendar {

namespace {

constexpr std::array<int, 12> kMonthLengths{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

unsigned parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  unsigned value = 0;
  const char* first = text.data() + pos;
  const char* last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw DataError("bad timestamp '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

CivilTime to_civil(std::int64_t epoch_seconds) {
  std::int64_t days = epoch_seconds / kSecondsPerDay;
  std::int64_t rem = epoch_seconds % kSecondsPerDay;
  if (rem < 0) {
    rem += kSecondsPerDay;
    --days;
  }
  // Inverse of days_from_civil (H. Hinnant).
  const std::int64_t z = days + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
  return {y, m, d, static_cast<unsigned>(rem / 3600), static_cast<unsigned>(rem % 3600 / 60),
          static_cast<unsigned>(rem % 60)};
}

std::string format_iso8601(std::int64_t epoch_seconds) {
  const CivilTime c = to_civil(epoch_seconds);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02u:%02u:%02u", static_cast<long long>(c.year),
                c.month, c.day, c.hour, c.minute, c.second);
  return buf;
}

std::int64_t parse_iso8601(std::string_view text) {
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':') {
    throw DataError("bad timestamp '" + std::string(text) + "'");
  }
  const unsigned y = parse_field(text, 0, 4);
  const unsigned mo = parse_field(text, 5, 2);
  const unsigned d = parse_field(text, 8, 2);
  const unsigned h = parse_field(text, 11, 2);
  const unsigned mi = parse_field(text, 14, 2);
  const unsigned s = parse_field(text, 17, 2);
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59) {
    throw DataError("bad timestamp '" + std::string(text) + "'");
  }
  return days_from_civil(y, mo, d) * kSecondsPerDay + h * 3600 + mi * 60 + s;
}

int parse_month_day(std::string_view text) {
  unsigned m = 0;
  unsigned d = 0;
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) throw ConfigError("bad month-day '" + std::string(text) + "'");
  auto r1 = std::from_chars(text.data(), text.data() + dash, m);
  auto r2 = std::from_chars(text.data() + dash + 1, text.data() + text.size(), d);
  if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != text.data() + dash ||
      r2.ptr != text.data() + text.size() || m < 1 || m > 12 || d < 1 ||
      d > static_cast<unsigned>(kMonthLengths[m - 1])) {
    throw ConfigError("bad month-day '" + std::string(text) + "'");
  }
  return first_day_of_month(static_cast<int>(m)) + static_cast<int>(d) - 1;
}

std::string format_month_day(int day_of_year) {
  int month = 1;
  while (month < 12 && day_of_year >= first_day_of_month(month + 1)) ++month;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d-%02d", month, day_of_year - first_day_of_month(month) + 1);
  return buf;
}

int first_day_of_month(int month) {
  if (month < 1 || month > 12) throw ConfigError("month out of range: " + std::to_string(month));
  int day = 0;
  for (int m = 1; m < month; ++m) day += kMonthLengths[m - 1];
  return day;
}

}  // namespace amda::calendar
