#include "dtqs/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "dtqs/csv.hpp"
#include "dtqs/error.hpp"
#include "dtqs/io.hpp"

namespace dtqs {
namespace {

const std::string kModule = "ingestion";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

// Maps required column names to their index in the header.
struct Table {
  std::vector<std::size_t> column;
  std::size_t header_width = 0;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
  std::vector<Rejection> rejections;
};

Table read_table(std::string_view text, const std::string& source, const std::vector<std::string>& required) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  auto lines = csv::lines(text);
  Table table;
  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw Error(kModule, ErrorCategory::schema, source + ": missing header row");
  auto header = csv::split_line(lines[i]);
  if (!header) throw Error(kModule, ErrorCategory::parse, fmt::format("{}:{}: malformed header", source, i + 1));
  table.header_width = header->size();
  std::vector<std::string> missing;
  for (const auto& name : required) {
    auto it = std::find_if(header->begin(), header->end(), [&](const std::string& h) { return trim(h) == name; });
    if (it == header->end()) {
      missing.push_back(name);
    } else {
      table.column.push_back(static_cast<std::size_t>(it - header->begin()));
    }
  }
  if (!missing.empty()) {
    throw Error(kModule, ErrorCategory::schema,
                fmt::format("{}: missing required column(s): {}", source, fmt::join(missing, ", ")));
  }
  for (++i; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto fields = csv::split_line(lines[i]);
    if (!fields) {
      table.rejections.push_back({source, i + 1, "unterminated quote"});
    } else if (fields->size() != table.header_width) {
      table.rejections.push_back(
          {source, i + 1, fmt::format("expected {} fields, found {}", table.header_width, fields->size())});
    } else {
      table.rows.emplace_back(i + 1, std::move(*fields));
    }
  }
  return table;
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::outbound ? "outbound" : "inbound"; }

std::string RouteKey::route_label() const {
  return fmt::format("{}/{}/{}", line, subline, direction == Direction::outbound ? 0 : 1);
}

std::string RouteKey::to_string() const {
  return fmt::format("{}|{}|{}|{}|{}|{}|{}", line, subline, direction == Direction::outbound ? 0 : 1, chain, range,
                     parc, date.to_string());
}

ParseResult<CourseEvent> parse_courses_text(std::string_view text, const std::string& source) {
  static const std::vector<std::string> kColumns = {"line", "subline", "chain",        "range",    "direction",
                                                    "parc", "date",    "station_name", "timestamp"};
  Table table = read_table(text, source, kColumns);
  ParseResult<CourseEvent> out;
  out.rejections = std::move(table.rejections);
  for (auto& [line_no, fields] : table.rows) {
    auto field = [&](std::size_t k) { return trim(fields[table.column[k]]); };
    auto reject = [&](std::string reason) { out.rejections.push_back({source, line_no, std::move(reason)}); };
    CourseEvent ev;
    ev.line = field(0);
    ev.subline = field(1);
    ev.chain = field(2);
    ev.range = field(3);
    ev.parc = field(5);
    ev.station_name = field(7);
    ev.source_line = line_no;
    if (ev.line.empty()) { reject("empty line"); continue; }
    if (ev.parc.empty()) { reject("empty parc"); continue; }
    const auto dir = field(4);
    if (dir == "0") {
      ev.direction = Direction::outbound;
    } else if (dir == "1") {
      ev.direction = Direction::inbound;
    } else {
      reject(fmt::format("invalid direction '{}'", dir));
      continue;
    }
    auto date = parse_date(field(6));
    if (!date) { reject(fmt::format("invalid date '{}'", field(6))); continue; }
    ev.date = *date;
    auto ts = parse_time_of_day(field(8));
    if (!ts) { reject(fmt::format("invalid timestamp '{}'", field(8))); continue; }
    ev.timestamp = *ts;
    out.records.push_back(std::move(ev));
  }
  return out;
}

ParseResult<CourseEvent> parse_courses(const std::filesystem::path& path) {
  return parse_courses_text(read_text_file(path, kModule), path.string());
}

ParseResult<GpsFix> parse_locations_text(std::string_view text, const std::string& source) {
  static const std::vector<std::string> kColumns = {"parc", "date", "timestamp", "lat", "lon"};
  Table table = read_table(text, source, kColumns);
  ParseResult<GpsFix> out;
  out.rejections = std::move(table.rejections);
  for (auto& [line_no, fields] : table.rows) {
    auto field = [&](std::size_t k) { return trim(fields[table.column[k]]); };
    auto reject = [&](std::string reason) { out.rejections.push_back({source, line_no, std::move(reason)}); };
    GpsFix fix;
    fix.parc = field(0);
    fix.source_line = line_no;
    if (fix.parc.empty()) { reject("empty parc"); continue; }
    auto date = parse_date(field(1));
    if (!date) { reject(fmt::format("invalid date '{}'", field(1))); continue; }
    fix.date = *date;
    auto ts = parse_time_of_day(field(2));
    if (!ts) { reject(fmt::format("invalid timestamp '{}'", field(2))); continue; }
    fix.timestamp = *ts;
    auto lat = parse_double(field(3));
    auto lon = parse_double(field(4));
    if (!lat || !lon) { reject("non-numeric coordinate"); continue; }
    fix.position = {*lat, *lon};
    if (!is_valid(fix.position)) { reject(fmt::format("coordinate out of range ({}, {})", *lat, *lon)); continue; }
    out.records.push_back(std::move(fix));
  }
  auto key = [](const GpsFix& f) { return std::tie(f.parc, f.date, f.timestamp, f.source_line); };
  std::sort(out.records.begin(), out.records.end(), [&](const GpsFix& a, const GpsFix& b) { return key(a) < key(b); });
  std::vector<GpsFix> unique;
  unique.reserve(out.records.size());
  for (auto& f : out.records) {
    if (!unique.empty() && unique.back().parc == f.parc && unique.back().date == f.date &&
        unique.back().timestamp == f.timestamp) {
      out.rejections.push_back({source, f.source_line,
                                fmt::format("duplicate fix for parc {} at {}", f.parc, format_time_of_day(f.timestamp))});
      continue;
    }
    unique.push_back(std::move(f));
  }
  out.records = std::move(unique);
  std::sort(out.rejections.begin(), out.rejections.end(),
            [](const Rejection& a, const Rejection& b) { return a.line_number < b.line_number; });
  return out;
}

ParseResult<GpsFix> parse_locations(const std::filesystem::path& path) {
  return parse_locations_text(read_text_file(path, kModule), path.string());
}

JoinResult join_datasets(const std::vector<CourseEvent>& events, const std::vector<GpsFix>& fixes, int margin_s) {
  if (margin_s < 0) throw Error(kModule, ErrorCategory::input, "claim margin must be non-negative");
  using DayKey = std::pair<std::string, CalendarDate>;
  std::map<DayKey, std::vector<const CourseEvent*>> events_by_day;
  for (const auto& ev : events) events_by_day[{ev.parc, ev.date}].push_back(&ev);
  std::map<DayKey, std::vector<const GpsFix*>> fixes_by_day;
  for (const auto& f : fixes) fixes_by_day[{f.parc, f.date}].push_back(&f);

  JoinResult result;
  for (auto& [day, fx] : fixes_by_day) {
    std::stable_sort(fx.begin(), fx.end(), [](const GpsFix* a, const GpsFix* b) { return a->timestamp < b->timestamp; });
    for (std::size_t i = 1; i < fx.size(); ++i) {
      if (fx[i]->timestamp == fx[i - 1]->timestamp) {
        throw Error(kModule, ErrorCategory::contract,
                    fmt::format("duplicate fix timestamp {} for parc {} on {}", format_time_of_day(fx[i]->timestamp),
                                day.first, day.second.to_string()));
      }
    }
    if (!events_by_day.contains(day)) result.unassigned_fixes += fx.size();
  }

  for (auto& [day, evs] : events_by_day) {
    std::stable_sort(evs.begin(), evs.end(), [](const CourseEvent* a, const CourseEvent* b) {
      return std::tie(a->timestamp, a->source_line) < std::tie(b->timestamp, b->source_line);
    });
    struct Run {
      RouteKey key;
      std::vector<const CourseEvent*> events;
      std::vector<const GpsFix*> fixes;
    };
    std::vector<Run> runs;
    for (const CourseEvent* ev : evs) {
      RouteKey key{ev->line, ev->subline, ev->direction, ev->chain, ev->range, ev->parc, ev->date};
      if (runs.empty() || runs.back().key != key) runs.push_back({std::move(key), {}, {}});
      runs.back().events.push_back(ev);
    }

    auto nearest_gap = [](const Run& run, int ts) {
      auto it = std::lower_bound(run.events.begin(), run.events.end(), ts,
                                 [](const CourseEvent* e, int t) { return e->timestamp < t; });
      int best = std::numeric_limits<int>::max();
      if (it != run.events.end()) best = (*it)->timestamp - ts;
      if (it != run.events.begin()) best = std::min(best, ts - (*std::prev(it))->timestamp);
      return best;
    };

    auto fit = fixes_by_day.find(day);
    if (fit != fixes_by_day.end()) {
      for (const GpsFix* f : fit->second) {
        Run* owner = nullptr;
        int owner_gap = 0;
        for (auto& run : runs) {
          const int lo = run.events.front()->timestamp - margin_s;
          const int hi = run.events.back()->timestamp + margin_s;
          if (f->timestamp < lo || f->timestamp > hi) continue;
          const int gap = nearest_gap(run, f->timestamp);
          if (owner == nullptr || gap < owner_gap) {
            owner = &run;
            owner_gap = gap;
          }
        }
        if (owner) {
          owner->fixes.push_back(f);
        } else {
          ++result.unassigned_fixes;
        }
      }
    }

    for (std::size_t r = 0; r < runs.size(); ++r) {
      Run& run = runs[r];
      if (run.fixes.empty()) {
        result.orphans.push_back({run.key, run.events.front()->timestamp, run.events.back()->timestamp,
                                  "no GPS fixes within the claim window"});
        continue;
      }
      Trace trace;
      trace.key = run.key;
      for (const auto* ev : run.events) trace.station_events.push_back(*ev);
      for (const auto* f : run.fixes) trace.fixes.push_back(*f);
      if (r > 0) trace.previous_end = runs[r - 1].events.back()->timestamp;
      if (r + 1 < runs.size()) trace.next_start = runs[r + 1].events.front()->timestamp;
      result.traces.push_back(std::move(trace));
    }
  }
  return result;
}

}  // namespace dtqs
