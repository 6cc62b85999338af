#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <random>
#include <set>

#include <fmt/format.h>

#include "dtqs/error.hpp"
#include "dtqs/ingestion.hpp"
#include "dtqs/io.hpp"

using namespace dtqs;

namespace {

const std::string kCourseHeader = "line,subline,chain,range,direction,parc,date,station_name,timestamp\n";
const std::string kLocationHeader = "parc,date,timestamp,lat,lon\n";

CourseEvent event(const std::string& line, Direction dir, const std::string& parc, int ts, const std::string& chain = "C1") {
  CourseEvent ev;
  ev.line = line;
  ev.subline = "A";
  ev.chain = chain;
  ev.range = "R1";
  ev.direction = dir;
  ev.parc = parc;
  ev.date = {2016, 3, 1};
  ev.station_name = "S";
  ev.timestamp = ts;
  return ev;
}

GpsFix fix(const std::string& parc, int ts) {
  GpsFix f;
  f.parc = parc;
  f.date = {2016, 3, 1};
  f.timestamp = ts;
  f.position = {48.85, 2.35};
  return f;
}

int hms(int h, int m, int s) { return h * 3600 + m * 60 + s; }

// Naive restatement of the claim rule: scan every event of every window.
std::vector<int> oracle_assignment(const std::vector<std::vector<int>>& runs, const std::vector<int>& fixes, int margin) {
  std::vector<int> owner;
  for (int t : fixes) {
    int best = -1;
    long best_gap = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (t < runs[r].front() - margin || t > runs[r].back() + margin) continue;
      long gap = 1L << 40;
      for (int e : runs[r]) gap = std::min<long>(gap, std::labs(static_cast<long>(t) - e));
      if (best < 0 || gap < best_gap) {
        best = static_cast<int>(r);
        best_gap = gap;
      }
    }
    owner.push_back(best);
  }
  return owner;
}

}  // namespace

TEST_CASE("parse_courses") {
  auto one = parse_courses_text(kCourseHeader + "12,A,CH1,R1,0,P7,2016-03-01,Gare,14:00:05\n", "c.csv");
  REQUIRE(one.records.size() == 1);
  CHECK(one.rejections.empty());
  CHECK(one.records[0].timestamp == hms(14, 0, 5));
  CHECK(one.records[0].direction == Direction::outbound);
  CHECK(one.records[0].station_name == "Gare");

  auto late = parse_courses_text(kCourseHeader + "12,A,CH1,R1,0,P7,2016-03-01,Gare,25:00:00\n", "c.csv");
  CHECK(late.records.empty());
  REQUIRE(late.rejections.size() == 1);
  CHECK(late.rejections[0].line_number == 2);
  CHECK(late.rejections[0].file == "c.csv");

  auto mixed = parse_courses_text(kCourseHeader + "12,A,CH1,R1,0,P7,2016-03-01,Gare,14:00:05\n"
                                                  "12,A,CH1,R1,2,P7,2016-03-01,Gare,14:01:05\n"
                                                  "12,A,CH1,R1,1,P7,2016-03-01,\"Place, Nord\",14:02:05\n",
                                  "c.csv");
  CHECK(mixed.records.size() == 2);
  CHECK(mixed.rejections.size() == 1);
  CHECK(mixed.records[1].station_name == "Place, Nord");
  CHECK(mixed.records[1].direction == Direction::inbound);

  auto bad_date = parse_courses_text(kCourseHeader + "12,A,CH1,R1,0,P7,2016-02-30,Gare,14:00:05\n"
                                                     "12,A,CH1,R1,0,P7,2016-03-01,Gare\n",
                                     "c.csv");
  CHECK(bad_date.records.empty());
  CHECK(bad_date.rejections.size() == 2);

  try {
    parse_courses_text("line,subline,chain,direction,parc,date,station_name,timestamp\n", "c.csv");
    FAIL("expected schema error");
  } catch (const Error& ex) {
    CHECK(ex.category() == ErrorCategory::schema);
    CHECK(std::string(ex.what()).find("range") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_courses("/nonexistent/courses.csv"), Error);
}

TEST_CASE("parse_locations") {
  auto one = parse_locations_text(kLocationHeader + "P7,2016-03-01,14:00:05,48.85,2.35\n", "l.csv");
  REQUIRE(one.records.size() == 1);
  CHECK(one.records[0].position.lat == doctest::Approx(48.85));
  CHECK(one.records[0].source_line == 2);

  auto range = parse_locations_text(kLocationHeader + "P7,2016-03-01,14:00:05,95,2.35\n"
                                                      "P7,2016-03-01,14:00:06,48.8,abc\n",
                                    "l.csv");
  CHECK(range.records.empty());
  CHECK(range.rejections.size() == 2);

  auto unsorted = parse_locations_text(kLocationHeader + "P7,2016-03-01,14:00:30,48.85,2.35\n"
                                                         "P7,2016-03-01,14:00:05,48.85,2.35\n"
                                                         "P7,2016-03-01,14:00:17,48.85,2.35\n"
                                                         "P7,2016-03-01,14:00:17,48.86,2.35\n",
                                       "l.csv");
  REQUIRE(unsorted.records.size() == 3);
  CHECK(unsorted.records[0].timestamp == hms(14, 0, 5));
  CHECK(unsorted.records[1].timestamp == hms(14, 0, 17));
  CHECK(unsorted.records[2].timestamp == hms(14, 0, 30));
  REQUIRE(unsorted.rejections.size() == 1);
  CHECK(unsorted.rejections[0].line_number == 5);

  auto reordered = parse_locations_text("lon,lat,timestamp,date,parc\r\n2.35,48.85,14:00:05,2016-03-01,P7\r\n", "l.csv");
  REQUIRE(reordered.records.size() == 1);
  CHECK(reordered.records[0].position.lon == doctest::Approx(2.35));
  CHECK_THROWS_AS(parse_locations_text("", "l.csv"), Error);
}

TEST_CASE("parse from files") {
  const auto dir = std::filesystem::temp_directory_path() / "dtqs_ingestion_test";
  std::filesystem::create_directories(dir);
  write_text_file(dir / "c.csv", kCourseHeader + "12,A,CH1,R1,0,P7,2016-03-01,Gare,14:00:05\n", "test");
  write_text_file(dir / "l.csv", kLocationHeader + "P7,2016-03-01,14:00:05,48.85,2.35\n", "test");
  CHECK(parse_courses(dir / "c.csv").records.size() == 1);
  CHECK(parse_locations(dir / "l.csv").records.size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("join_datasets nearest-time rule") {
  std::vector<CourseEvent> evs{event("12", Direction::outbound, "P7", hms(13, 50, 0)),
                               event("12", Direction::outbound, "P7", hms(14, 10, 0)),
                               event("12", Direction::inbound, "P7", hms(15, 0, 0)),
                               event("12", Direction::inbound, "P7", hms(15, 20, 0))};
  std::vector<GpsFix> fixes{fix("P7", hms(14, 0, 5)), fix("P7", hms(14, 30, 0)), fix("P7", hms(15, 10, 0))};
  auto joined = join_datasets(evs, fixes);
  REQUIRE(joined.traces.size() == 2);
  CHECK(joined.orphans.empty());
  CHECK(joined.traces[0].key.direction == Direction::outbound);
  REQUIRE(joined.traces[0].fixes.size() == 1);
  CHECK(joined.traces[0].fixes[0].timestamp == hms(14, 0, 5));
  CHECK(joined.traces[1].fixes.size() == 1);
  CHECK(joined.unassigned_fixes == 1);
  CHECK(joined.traces[0].next_start == hms(15, 0, 0));
  CHECK(!joined.traces[0].previous_end);
  CHECK(joined.traces[1].previous_end == hms(14, 10, 0));

  SUBCASE("overlapping windows go to the closest event") {
    std::vector<CourseEvent> close{event("12", Direction::outbound, "P7", hms(14, 0, 0)),
                                   event("12", Direction::outbound, "P7", hms(14, 10, 0)),
                                   event("12", Direction::inbound, "P7", hms(14, 13, 0)),
                                   event("12", Direction::inbound, "P7", hms(14, 30, 0))};
    auto j = join_datasets(close, {fix("P7", hms(14, 11, 0)), fix("P7", hms(14, 12, 0)), fix("P7", hms(14, 11, 30))});
    REQUIRE(j.traces.size() == 2);
    CHECK(j.traces[0].fixes.size() == 2);  // 14:11:00 and the 14:11:30 tie
    CHECK(j.traces[1].fixes.size() == 1);
  }

  SUBCASE("orphans and fixes on days without events") {
    auto j = join_datasets(evs, {fix("P7", hms(14, 0, 5)), fix("P9", hms(14, 0, 5))});
    CHECK(j.traces.size() == 1);
    REQUIRE(j.orphans.size() == 1);
    CHECK(j.orphans[0].key.direction == Direction::inbound);
    CHECK(j.unassigned_fixes == 1);
  }

  CHECK_THROWS_AS(join_datasets(evs, {fix("P7", 100), fix("P7", 100)}), Error);
}

TEST_CASE("join_datasets against oracle and ground truth") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<CourseEvent> evs;
    std::vector<GpsFix> fixes;
    std::vector<std::vector<int>> runs;
    std::vector<int> fix_times, truth;
    std::uniform_int_distribution<int> spacing(60, 240), n_events(2, 8), step(9, 20), gap(0, 900);
    const bool separated = trial % 2 == 0;
    int t = hms(6, 0, 0);
    const int n_runs = 2 + trial % 5;
    int max_spacing = 240;
    for (int r = 0; r < n_runs; ++r) {
      const Direction dir = r % 2 == 0 ? Direction::outbound : Direction::inbound;
      std::vector<int> times;
      const int k = n_events(rng);
      for (int e = 0; e < k; ++e) {
        times.push_back(t);
        evs.push_back(event("12", dir, "P7", t));
        t += spacing(rng);
      }
      t = times.back() + (separated ? max_spacing + gap(rng) : gap(rng) / 10 + 1);
      runs.push_back(times);
    }
    // Fixes before, inside and after the runs.
    for (int ft = hms(5, 50, 0); ft < t + 600; ft += step(rng)) {
      fix_times.push_back(ft);
      fixes.push_back(fix("P7", ft));
      int label = -1;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        if (ft >= runs[r].front() && ft <= runs[r].back()) label = static_cast<int>(r);
      }
      truth.push_back(label);
    }
    std::shuffle(fixes.begin(), fixes.end(), rng);

    auto joined = join_datasets(evs, fixes);
    auto expected = oracle_assignment(runs, fix_times, kClaimMarginS);

    // Map assigned fixes back to run indices through the first event time.
    std::map<int, int> assigned;
    std::set<int> seen;
    for (const auto& tr : joined.traces) {
      int run = -1;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].front() == tr.station_events.front().timestamp) run = static_cast<int>(r);
      }
      REQUIRE(run >= 0);
      for (std::size_t i = 0; i < tr.fixes.size(); ++i) {
        CHECK(seen.insert(tr.fixes[i].timestamp).second);  // never assigned twice
        if (i > 0) CHECK(tr.fixes[i].timestamp > tr.fixes[i - 1].timestamp);
        assigned[tr.fixes[i].timestamp] = run;
      }
    }
    std::size_t unassigned = 0;
    for (std::size_t i = 0; i < fix_times.size(); ++i) {
      auto it = assigned.find(fix_times[i]);
      const int got = it == assigned.end() ? -1 : it->second;
      CHECK(got == expected[i]);
      if (got < 0) ++unassigned;
      if (separated && truth[i] >= 0) CHECK(got == truth[i]);
    }
    CHECK(unassigned == joined.unassigned_fixes);
    // Total on trajectories.
    CHECK(joined.traces.size() + joined.orphans.size() == runs.size());
    // Deterministic regardless of input order.
    std::shuffle(fixes.begin(), fixes.end(), rng);
    auto again = join_datasets(evs, fixes);
    REQUIRE(again.traces.size() == joined.traces.size());
    for (std::size_t i = 0; i < again.traces.size(); ++i) {
      CHECK(again.traces[i].key == joined.traces[i].key);
      REQUIRE(again.traces[i].fixes.size() == joined.traces[i].fixes.size());
      for (std::size_t j = 0; j < again.traces[i].fixes.size(); ++j) {
        CHECK(again.traces[i].fixes[j].timestamp == joined.traces[i].fixes[j].timestamp);
      }
    }
  }
}

TEST_CASE("route keys split on chain and range") {
  std::vector<CourseEvent> evs{event("12", Direction::outbound, "P7", 1000, "C1"),
                               event("12", Direction::outbound, "P7", 1100, "C1"),
                               event("12", Direction::outbound, "P7", 1200, "C2"),
                               event("12", Direction::outbound, "P7", 1300, "C2")};
  auto j = join_datasets(evs, {fix("P7", 1050), fix("P7", 1250)});
  REQUIRE(j.traces.size() == 2);
  CHECK(j.traces[0].key.chain == "C1");
  CHECK(j.traces[1].key.chain == "C2");
  CHECK(j.traces[0].key.route_label() == "12/A/0");
}
