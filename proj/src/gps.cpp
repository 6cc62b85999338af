#include "dtqs/gps.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

namespace dtqs {
namespace {

std::optional<int> parse_fixed_int(std::string_view text) {
  if (text.empty()) return std::nullopt;
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

std::string CalendarDate::to_string() const { return fmt::format("{:04d}-{:02d}-{:02d}", year, month, day); }

std::optional<CalendarDate> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto y = parse_fixed_int(text.substr(0, 4));
  auto m = parse_fixed_int(text.substr(5, 2));
  auto d = parse_fixed_int(text.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
  if (*m < 1 || *d < 1 || !ymd.ok()) return std::nullopt;
  return CalendarDate{*y, *m, *d};
}

std::optional<int> parse_time_of_day(std::string_view text) {
  if (text.size() != 8 || text[2] != ':' || text[5] != ':') return std::nullopt;
  auto h = parse_fixed_int(text.substr(0, 2));
  auto m = parse_fixed_int(text.substr(3, 2));
  auto s = parse_fixed_int(text.substr(6, 2));
  if (!h || !m || !s) return std::nullopt;
  if (*h < 0 || *h > 23 || *m < 0 || *m > 59 || *s < 0 || *s > 59) return std::nullopt;
  return *h * 3600 + *m * 60 + *s;
}

std::string format_time_of_day(int seconds) {
  return fmt::format("{:02d}:{:02d}:{:02d}", seconds / 3600, (seconds / 60) % 60, seconds % 60);
}

}  // namespace dtqs
