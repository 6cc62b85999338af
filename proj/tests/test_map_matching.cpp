#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include <json.hpp>

#include "dtqs/error.hpp"
#include "dtqs/map_matching.hpp"
#include "support/fixtures.hpp"

using namespace dtqs;
using dtqs::test::fix_at;
using dtqs::test::make_network;
using dtqs::test::roundabout_network;
using dtqs::test::trace_of;

namespace {

bool non_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("snap_trace threshold") {
  auto net = make_network({{1, {0, 0}}, {2, {1000, 0}}}, {{1, 1, 2, 50, true}});
  auto m = snap_trace(trace_of({{100, 10}, {200, 200}, {300, -5}}), net);
  CHECK(m.points.size() == 2);
  CHECK(m.shredded_count == 1);
  CHECK(m.points[0].snap_distance_m == doctest::Approx(10.0).epsilon(1e-3));
  for (const auto& p : m.points) CHECK(p.snap_distance_m <= 50.0);

  // Injected off-road fixes are exactly the shredded ones.
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> along(0, 1000), jitter(-8, 8), far(120, 400);
  std::vector<std::pair<double, double>> xy;
  int injected = 0;
  for (int i = 0; i < 200; ++i) {
    if (i % 20 == 7) {
      xy.push_back({along(rng), far(rng) * (i % 40 == 7 ? 1 : -1)});
      ++injected;
    } else {
      xy.push_back({along(rng), jitter(rng)});
    }
  }
  CHECK(snap_trace(trace_of(xy), net).shredded_count == static_cast<std::size_t>(injected));
  CHECK_THROWS_AS(snap_trace(trace_of({{0, 500}, {10, 600}}), net), Error);
  auto shuffled = trace_of({{100, 0}, {200, 0}});
  std::swap(shuffled.fixes[0].timestamp, shuffled.fixes[1].timestamp);
  CHECK_THROWS_AS(snap_trace(shuffled, net), Error);
}

TEST_CASE("detect_surrounding_points") {
  auto net = make_network({{1, {0, 0}}, {2, {1000, 0}}}, {{1, 1, 2, 50, true}});
  auto tagged = detect_surrounding_points(snap_trace(trace_of({{100, 3}, {200, -2}, {300, 1}, {400, 0}}), net), net);
  for (auto t : tagged.direction_tags) CHECK(t == Travel::forward);

  auto two_way = make_network({{1, {0, 0}}, {2, {1000, 0}}}, {{1, 1, 2}});
  auto back = detect_surrounding_points(snap_trace(trace_of({{400, 0}, {300, 0}, {300, 0}, {200, 0}}), two_way), two_way);
  CHECK(back.direction_tags[0] == Travel::backward);
  CHECK(back.direction_tags[1] == Travel::backward);
  CHECK(back.direction_tags[2] == Travel::backward);  // identical position inherits

  auto stop = detect_surrounding_points(snap_trace(trace_of({{100, 0}, {200, 0}, {200, 0}, {100, 0}}), two_way), two_way);
  CHECK(stop.direction_tags[2] == stop.direction_tags[1]);
  CHECK(stop.direction_tags[3] == Travel::backward);

  CHECK_THROWS_AS(detect_surrounding_points(snap_trace(trace_of({{100, 0}}), net), net), Error);
}

TEST_CASE("roundabout with opposite carriageways") {
  auto net = roundabout_network();
  Router router(net, 50.0);
  auto trace = test::roundabout_trace();
  auto snapped = snap_trace(trace, net);
  std::vector<EdgeId> naive;
  for (const auto& p : snapped.points) naive.push_back(p.edge_id);
  CHECK(naive == std::vector<EdgeId>{1, 1, 1, 11, 11, 11, 11, 12, 13, 10, 10, 10, 10, 1, 1});

  auto tagged = detect_surrounding_points(snapped, net);
  CHECK(tagged.direction_tags[3] == Travel::backward);
  CHECK(tagged.direction_tags[9] == Travel::backward);
  CHECK(tagged.direction_tags[13] == Travel::backward);

  auto ordered = reorder_trace(tagged, router);
  std::vector<EdgeId> edges;
  for (const auto& p : ordered.points) edges.push_back(p.edge_id);
  CHECK(edges == test::kRoundaboutEdges);
  for (std::size_t i = 0; i < 13; ++i) CHECK(ordered.direction_tags[i] == Travel::forward);
  CHECK(ordered.direction_tags[13] == Travel::backward);
  CHECK(ordered.direction_tags[14] == Travel::backward);
  CHECK(non_decreasing(ordered.progress_m));
  // Route length from x=-250 out and back to x=-150 along edge geometry.
  const double expected = 250.0 + net.edge(10).length_m + net.edge(12).length_m + net.edge(13).length_m +
                          net.edge(11).length_m + 150.0;
  CHECK(ordered.progress_m.back() == doctest::Approx(expected).epsilon(0.02));

  auto again = reorder_trace(ordered, router);
  for (std::size_t i = 0; i < again.points.size(); ++i) {
    CHECK(again.points[i].edge_id == ordered.points[i].edge_id);
    CHECK(again.points[i].offset_m == ordered.points[i].offset_m);
    CHECK(again.direction_tags[i] == ordered.direction_tags[i]);
    CHECK(again.progress_m[i] == ordered.progress_m[i]);
  }

  auto dump = nlohmann::json::parse(matched_trace_debug_geojson(ordered));
  CHECK(dump["features"].size() == 3 * ordered.points.size());
}

TEST_CASE("reorder_trace contracts") {
  auto net = make_network({{1, {0, 0}}, {2, {1000, 0}}}, {{1, 1, 2, 50, true}});
  Router router(net, 50.0);
  auto tagged = detect_surrounding_points(snap_trace(trace_of({{100, 0}, {200, 0}, {300, 0}}), net), net);
  auto ordered = reorder_trace(tagged, router);
  REQUIRE(ordered.progress_m.size() == 3);
  CHECK(ordered.progress_m[0] == 0.0);
  CHECK(ordered.progress_m[1] == doctest::Approx(100.0).epsilon(1e-3));
  CHECK(ordered.progress_m[2] == doctest::Approx(200.0).epsilon(1e-3));

  auto shuffled = tagged;
  std::swap(shuffled.points[0].source_fix.timestamp, shuffled.points[2].source_fix.timestamp);
  CHECK_THROWS_AS(reorder_trace(shuffled, router), Error);

  auto untagged = snap_trace(trace_of({{100, 0}, {200, 0}}), net);
  CHECK_THROWS_AS(reorder_trace(untagged, router), Error);

  // A 700 m jump backwards on a one-way road cannot be driven.
  auto impossible = detect_surrounding_points(snap_trace(trace_of({{500, 0}, {900, 0}, {100, 0}}), net), net);
  try {
    reorder_trace(impossible, router);
    FAIL("expected irreconcilable");
  } catch (const Error& ex) {
    CHECK(ex.category() == ErrorCategory::validation);
  }
  auto outcome = match_trace(trace_of({{500, 0}, {900, 0}, {100, 0}}), router);
  CHECK(outcome.status == MatchStatus::irreconcilable);
  CHECK(match_trace(trace_of({{500, 0}, {600, 0}}), router).status == MatchStatus::degenerate);
  CHECK(match_trace(trace_of({{500, 300}, {600, 300}}), router).status == MatchStatus::empty);
  CHECK(match_trace(trace_of({{500, 0}, {600, 0}, {700, 0}}), router).status == MatchStatus::ok);
}

TEST_CASE("progress is non-decreasing on noisy traces with stops") {
  std::vector<std::pair<NodeId, std::pair<double, double>>> nodes;
  std::vector<test::EdgeSpec> edges;
  for (int i = 0; i <= 10; ++i) nodes.push_back({i, {i * 300.0, (i % 2) * 40.0}});
  for (int i = 0; i < 10; ++i) edges.push_back({i, i, i + 1, i % 3 == 0 ? 30.0 : 50.0});
  auto net = make_network(nodes, edges);
  Router router(net, 50.0);
  std::mt19937 rng(99);
  std::normal_distribution<double> noise(0.0, 4.0);
  std::uniform_int_distribution<int> gap(9, 20);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    Trace t = trace_of({});
    double s = 0.0;  // true distance along the corridor
    int ts = 36000;
    double last_s = 0.0;
    while (s < 2900.0) {
      // Walk s onto the polyline.
      const int seg = std::min(9, static_cast<int>(s / 300.0));
      const double frac = (s - seg * 300.0) / 300.0;
      const double x0 = seg * 300.0, y0 = (seg % 2) * 40.0, x1 = (seg + 1) * 300.0, y1 = ((seg + 1) % 2) * 40.0;
      t.fixes.push_back(fix_at(x0 + frac * (x1 - x0) + noise(rng), y0 + frac * (y1 - y0) + noise(rng), ts));
      last_s = s;
      const int dt = gap(rng);
      ts += dt;
      const double move = unit(rng) < 0.2 ? 0.0 : dt * (5.0 + 6.0 * unit(rng));
      s += move;
    }
    auto out = match_trace(t, router);
    INFO(trial, " ", out.message);
    REQUIRE(out.status == MatchStatus::ok);
    CHECK(non_decreasing(out.trace.progress_m));
    // Each 300 m step in x is a slanted edge of length hypot(300, 40).
    const double travelled = last_s * std::hypot(300.0, 40.0) / 300.0;
    CHECK(out.trace.progress_m.back() == doctest::Approx(travelled).epsilon(0.03));
  }
}
