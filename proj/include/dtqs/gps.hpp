#ifndef DTQS_GPS_HPP
#define DTQS_GPS_HPP

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "dtqs/geo.hpp"

namespace dtqs {

/// Seconds since local midnight.
using Seconds = double;

inline constexpr int kSecondsPerDay = 86400;

/// Calendar date in ISO form (YYYY-MM-DD); ordering is chronological.
struct CalendarDate {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const CalendarDate&) const = default;
  std::string to_string() const;
};

std::optional<CalendarDate> parse_date(std::string_view text);

/// Parses HH:MM:SS into seconds since midnight; hours must be < 24.
std::optional<int> parse_time_of_day(std::string_view text);
std::string format_time_of_day(int seconds);

/// One timestamped position report from a vehicle.
struct GpsFix {
  std::string parc;
  CalendarDate date;
  int timestamp = 0;  // seconds since midnight
  LatLon position;
  std::size_t source_line = 0;  // 1-based line in the source file, 0 if synthetic
};

}  // namespace dtqs

#endif  // DTQS_GPS_HPP
