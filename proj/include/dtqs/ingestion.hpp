#ifndef DTQS_INGESTION_HPP
#define DTQS_INGESTION_HPP

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtqs/gps.hpp"

namespace dtqs {

enum class Direction { outbound, inbound };

std::string_view to_string(Direction d);

/// A bus passing a station, from the course dataset.
struct CourseEvent {
  std::string line;
  std::string subline;
  std::string chain;
  std::string range;
  Direction direction = Direction::outbound;
  std::string parc;
  CalendarDate date;
  std::string station_name;
  int timestamp = 0;
  std::size_t source_line = 0;
};

struct Rejection {
  std::string file;
  std::size_t line_number = 0;
  std::string reason;
};

template <class T>
struct ParseResult {
  std::vector<T> records;
  std::vector<Rejection> rejections;
};

/// Courses CSV. A missing required column is a schema error; bad rows are
/// rejected and parsing continues.
ParseResult<CourseEvent> parse_courses(const std::filesystem::path& path);
ParseResult<CourseEvent> parse_courses_text(std::string_view text, const std::string& source);

/// Locations CSV. Output is sorted by (parc, date, timestamp); a repeated
/// (parc, date, timestamp) is rejected.
ParseResult<GpsFix> parse_locations(const std::filesystem::path& path);
ParseResult<GpsFix> parse_locations_text(std::string_view text, const std::string& source);

struct RouteKey {
  std::string line;
  std::string subline;
  Direction direction = Direction::outbound;
  std::string chain;
  std::string range;
  std::string parc;
  CalendarDate date;

  auto operator<=>(const RouteKey&) const = default;
  bool operator==(const RouteKey&) const = default;

  /// Stable identifier of the route group (line, subline, direction).
  std::string route_label() const;
  std::string to_string() const;
};

struct Trace {
  RouteKey key;
  std::vector<GpsFix> fixes;  // strictly increasing timestamps
  std::vector<CourseEvent> station_events;
  // Neighbouring trajectories of the same vehicle-day, if any.
  std::optional<int> previous_end;
  std::optional<int> next_start;
};

struct OrphanReport {
  RouteKey key;
  int first_event = 0;
  int last_event = 0;
  std::string reason;
};

struct JoinResult {
  std::vector<Trace> traces;
  std::vector<OrphanReport> orphans;
  std::size_t unassigned_fixes = 0;
};

inline constexpr int kClaimMarginS = 120;

/// Splits each vehicle-day's events into trajectories (runs of one route key)
/// and assigns every fix to at most one trajectory.
JoinResult join_datasets(const std::vector<CourseEvent>& events, const std::vector<GpsFix>& fixes,
                         int margin_s = kClaimMarginS);

}  // namespace dtqs

#endif  // DTQS_INGESTION_HPP
