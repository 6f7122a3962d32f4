#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace amda::calendar {

inline constexpr int kDaysPerYear = 365;
inline constexpr std::int64_t kSecondsPerDay = 86400;
/// 2019-01-01T00:00:00, a Tuesday. Simulated years are always non-leap.
inline constexpr std::int64_t kYearStart = 1546300800;
inline constexpr int kYearStartWeekday = 1;  // 0 = Monday

/// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilTime {
  std::int64_t year;
  unsigned month, day, hour, minute, second;
};

CivilTime to_civil(std::int64_t epoch_seconds);

/// "YYYY-MM-DDTHH:MM:SS"
std::string format_iso8601(std::int64_t epoch_seconds);

/// Parses the format produced by format_iso8601; throws DataError.
std::int64_t parse_iso8601(std::string_view text);

/// Zero-based day of the non-leap year for "MM-DD"; throws ConfigError.
int parse_month_day(std::string_view text);

std::string format_month_day(int day_of_year);

/// First day of month (1-12) as zero-based day of a non-leap year.
int first_day_of_month(int month);

}  // namespace amda::calendar
