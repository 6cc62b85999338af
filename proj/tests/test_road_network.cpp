#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "dtqs/error.hpp"
#include "dtqs/road_network.hpp"
#include "support/fixtures.hpp"

using namespace dtqs;
using dtqs::test::at;
using dtqs::test::fix_at;
using dtqs::test::make_network;

namespace {

// Spherical law of cosines: an independent great-circle formula.
double law_of_cosines(LatLon a, LatLon b) {
  const double k = std::numbers::pi / 180.0;
  const double c = std::sin(a.lat * k) * std::sin(b.lat * k) +
                   std::cos(a.lat * k) * std::cos(b.lat * k) * std::cos((b.lon - a.lon) * k);
  return kEarthRadiusM * std::acos(std::clamp(c, -1.0, 1.0));
}

// Exhaustive oracle: every simple node path between the exit node of `from`
// and the entry node of `to`, for every permitted travel sense.
double brute_force_time(const RoadNetwork& net, const SnappedPoint& from, const SnappedPoint& to, double sp_c) {
  auto spm = [&](const Edge& e) { return 3.6 / std::min(e.speed_limit_kmh, sp_c); };
  const Edge& ef = net.edge(from.edge_id);
  const Edge& et = net.edge(to.edge_id);
  double best = kInfinity;

  struct Start { NodeId node; double cost; bool forward; };
  std::vector<Start> starts{{ef.to, (ef.length_m - from.offset_m) * spm(ef), true}};
  if (!ef.oneway) starts.push_back({ef.from, from.offset_m * spm(ef), false});
  std::vector<Start> ends{{et.from, to.offset_m * spm(et), true}};
  if (!et.oneway) ends.push_back({et.to, (et.length_m - to.offset_m) * spm(et), false});

  if (from.edge_id == to.edge_id) {
    if (to.offset_m >= from.offset_m) best = (to.offset_m - from.offset_m) * spm(ef);
    if (!ef.oneway && to.offset_m <= from.offset_m) best = std::min(best, (from.offset_m - to.offset_m) * spm(ef));
  }

  std::vector<NodeId> visited;
  std::function<void(NodeId, double)> walk = [&](NodeId u, double acc) {
    for (const auto& end : ends) {
      if (end.node == u) best = std::min(best, acc + end.cost);
    }
    for (const auto& e : net.edges()) {
      NodeId next = -1;
      if (e.from == u) next = e.to;
      else if (!e.oneway && e.to == u) next = e.from;
      if (next < 0 || std::find(visited.begin(), visited.end(), next) != visited.end()) continue;
      visited.push_back(next);
      walk(next, acc + e.length_m * spm(e));
      visited.pop_back();
    }
  };
  for (const auto& s : starts) {
    visited = {s.node};
    walk(s.node, s.cost);
  }
  return best;
}

SnappedPoint on_edge(const RoadNetwork& net, EdgeId id, double offset) {
  SnappedPoint sp;
  sp.edge_id = id;
  sp.offset_m = offset;
  sp.snapped = net.position_at(id, offset);
  return sp;
}

}  // namespace

TEST_CASE("haversine") {
  CHECK(haversine({0, 0}, {0, 0}) == doctest::Approx(0.0));
  const double arc = std::numbers::pi * kEarthRadiusM / 180.0;
  CHECK(arc == doctest::Approx(111194.9).epsilon(1e-6));
  CHECK(std::fabs(haversine({0, 0}, {0, 1}) - arc) < 0.1);

  const LatLon a{48.8566, 2.3522}, b{48.8606, 2.3376};
  const double oracle = law_of_cosines(a, b);
  CHECK(std::fabs(haversine(a, b) - oracle) / oracle < 1e-3);

  CHECK_THROWS_AS(haversine({91, 0}, {0, 0}), Error);
  CHECK_THROWS_AS(haversine({0, 0}, {0, 181}), Error);
}

TEST_CASE("haversine symmetry and triangle inequality") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-179.0, 179.0);
  for (int i = 0; i < 2000; ++i) {
    LatLon a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = haversine(a, b), ba = haversine(b, a);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(haversine(a, c) <= (ab + haversine(b, c)) * (1.0 + 1e-9));
  }
}

TEST_CASE("load_network fixtures") {
  const std::string minimal = R"({"type":"FeatureCollection","features":[
{"type":"Feature","geometry":{"type":"LineString","coordinates":[[2.35,48.85],[2.351,48.85]]},"properties":{"edge_id":1,"from_node":10,"to_node":11,"speed_limit_kmh":50,"oneway":false}}
]})";
  auto net = parse_network_geojson(minimal, "minimal.geojson");
  CHECK(net.nodes().size() == 2);
  CHECK(net.edges().size() == 1);
  CHECK(net.edge(1).length_m == doctest::Approx(haversine({48.85, 2.35}, {48.85, 2.351})));

  SUBCASE("edge referencing a missing node") {
    const std::string dangling = R"({"type":"FeatureCollection","features":[
{"type":"Feature","geometry":{"type":"Point","coordinates":[2.35,48.85]},"properties":{"node_id":10}},
{"type":"Feature","geometry":{"type":"LineString","coordinates":[[2.35,48.85],[2.351,48.85]]},"properties":{"edge_id":1,"from_node":10,"to_node":99,"speed_limit_kmh":50,"oneway":false}}
]})";
    try {
      parse_network_geojson(dangling, "dangling.geojson");
      FAIL("expected validation error");
    } catch (const Error& ex) {
      CHECK(ex.category() == ErrorCategory::validation);
      CHECK(std::string(ex.what()).find("99") != std::string::npos);
    }
  }

  SUBCASE("malformed record reports its line") {
    const std::string bad = "{\"type\":\"FeatureCollection\",\"features\":[\n"
                            "{\"type\":\"Feature\",\"geometry\":{\"type\":\"LineString\",\"coordinates\":[[2.35,48.85],[2.351,48.85]]},"
                            "\"properties\":{\"edge_id\":1,\"from_node\":1,\"to_node\":2,\"speed_limit_kmh\":50,\"oneway\":false}},\n"
                            "{\"type\":\"Feature\",\"geometry\":{\"type\":\"LineString\",\"coordinates\":[[2.35,48.85],[2.351,48.85]]},"
                            "\"properties\":{\"edge_id\":2,\"from_node\":1,\"speed_limit_kmh\":50,\"oneway\":false}}\n]}";
    try {
      parse_network_geojson(bad, "bad.geojson");
      FAIL("expected schema error");
    } catch (const Error& ex) {
      CHECK(ex.category() == ErrorCategory::schema);
      CHECK(std::string(ex.what()).find("bad.geojson:3") != std::string::npos);
    }
    try {
      parse_network_geojson("{\"type\":\n\"FeatureCollection\",,}", "syntax.geojson");
      FAIL("expected parse error");
    } catch (const Error& ex) {
      CHECK(ex.category() == ErrorCategory::parse);
      CHECK(std::string(ex.what()).find("syntax.geojson:2") != std::string::npos);
    }
  }

  SUBCASE("square loop total length") {
    const double side = 250.0;
    auto sq = make_network({{1, {0, 0}}, {2, {side, 0}}, {3, {side, side}}, {4, {0, side}}},
                           {{1, 1, 2}, {2, 2, 3}, {3, 3, 4}, {4, 4, 1}});
    auto reloaded = parse_network_geojson(network_to_geojson(sq), "square.geojson");
    CHECK(reloaded.edges().size() == 4);
    double total = 0.0, expected = 0.0;
    for (const auto& e : reloaded.edges()) {
      total += e.length_m;
      expected += haversine(reloaded.node(e.from).position, reloaded.node(e.to).position);
    }
    CHECK(total == doctest::Approx(expected).epsilon(1e-12));
    CHECK(total == doctest::Approx(4 * side).epsilon(1e-3));
  }

  SUBCASE("explicit length overrides geometry") {
    const std::string with_len = R"({"type":"FeatureCollection","features":[
{"type":"Feature","geometry":{"type":"LineString","coordinates":[[2.35,48.85],[2.351,48.85]]},"properties":{"edge_id":1,"from_node":10,"to_node":11,"speed_limit_kmh":50,"oneway":true,"length_m":120.5}}
]})";
    CHECK(parse_network_geojson(with_len).edge(1).length_m == doctest::Approx(120.5));
  }
  CHECK_THROWS_AS(load_network("/nonexistent/network.geojson"), Error);
}

TEST_CASE("nearest_network_point") {
  auto net = make_network({{1, {0, 0}}, {2, {300, 0}}, {3, {300, 300}}},
                          {{5, 1, 2, 50, false, {{100, 0}}}, {7, 2, 3}});

  auto on_vertex = nearest_network_point(fix_at(100, 0), net);
  CHECK(on_vertex.edge_id == 5);
  CHECK(on_vertex.snap_distance_m < 1e-6);
  CHECK(on_vertex.offset_m == doctest::Approx(100.0).epsilon(1e-3));

  // Planar oracle: on a 300 m edge the perpendicular distance is the answer.
  auto perpendicular = nearest_network_point(fix_at(150, 10), net);
  CHECK(perpendicular.edge_id == 5);
  CHECK(perpendicular.snap_distance_m == doctest::Approx(10.0).epsilon(1e-3));
  CHECK(perpendicular.offset_m == doctest::Approx(150.0).epsilon(1e-3));
  CHECK(perpendicular.offset_m >= 0.0);
  CHECK(perpendicular.offset_m <= net.edge(5).length_m);

  // Shared node 2 is equidistant from edges 5 and 7.
  auto tie = nearest_network_point(fix_at(310, -10), net);
  CHECK(tie.edge_id == 5);

  auto far = nearest_network_point(fix_at(5000, 5000), net);
  CHECK(far.edge_id == 7);
  CHECK(far.snap_distance_m > 1000.0);

  auto within = net.snap_candidates(fix_at(295, 5), 50.0);
  REQUIRE(within.size() == 2);
  CHECK(within[0].snap_distance_m <= within[1].snap_distance_m);
}

TEST_CASE("effective_speed") {
  CHECK(effective_speed(30, 50) == 30);
  CHECK(effective_speed(50, 30) == 30);
  CHECK(effective_speed(40, 40) == 40);
  CHECK_THROWS_AS(effective_speed(0, 30), Error);
  CHECK_THROWS_AS(effective_speed(30, -1), Error);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.1, 200.0);
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng), y = u(rng);
    CHECK(effective_speed(x, y) == effective_speed(y, x));
    CHECK(effective_speed(x, y) == std::min(x, y));
  }
}

TEST_CASE("theoretical_travel_time") {
  const std::string single = R"({"type":"FeatureCollection","features":[
{"type":"Feature","geometry":{"type":"LineString","coordinates":[[2.35,48.85],[2.351,48.85]]},"properties":{"edge_id":1,"from_node":1,"to_node":2,"speed_limit_kmh":36,"oneway":true,"length_m":100}}
]})";
  auto net = parse_network_geojson(single);
  auto a = on_edge(net, 1, 0.0), b = on_edge(net, 1, 100.0);
  CHECK(theoretical_travel_time(net, a, b, 50.0) == doctest::Approx(10.0));
  CHECK(theoretical_travel_time(net, a, a, 50.0) == 0.0);
  CHECK_THROWS_AS(theoretical_travel_time(net, b, a, 50.0), Error);

  SUBCASE("fast detour beats slow direct edge") {
    auto tri = make_network({{1, {0, 0}}, {2, {1000, 0}}, {3, {500, 300}}},
                            {{1, 1, 2, 10, false}, {2, 1, 3, 90, true}, {3, 3, 2, 90, true}});
    auto from = on_edge(tri, 1, 0.0);
    auto to = on_edge(tri, 1, tri.edge(1).length_m);
    const double t = theoretical_travel_time(tri, from, to, 120.0);
    CHECK(t == doctest::Approx(brute_force_time(tri, from, to, 120.0)).epsilon(1e-9));
    CHECK(t < tri.edge(1).length_m / (10 / 3.6));
  }
}

TEST_CASE("routing matches exhaustive enumeration on random small networks") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coord(0.0, 1500.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> node_count(3, 8);
  const double speeds[] = {20, 30, 50, 70, 90};
  int compared = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const int n = node_count(rng);
    std::vector<std::pair<NodeId, std::pair<double, double>>> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back({i, {coord(rng), coord(rng)}});
    std::vector<test::EdgeSpec> edges;
    EdgeId next_id = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && unit(rng) < 0.3) {
          edges.push_back({next_id++, i, j, speeds[static_cast<int>(unit(rng) * 5)], unit(rng) < 0.5});
        }
      }
    }
    if (edges.size() < 2) continue;
    auto net = make_network(nodes, edges);
    for (int q = 0; q < 6; ++q) {
      const auto& e1 = net.edges()[static_cast<std::size_t>(unit(rng) * net.edges().size())];
      const auto& e2 = net.edges()[static_cast<std::size_t>(unit(rng) * net.edges().size())];
      auto from = on_edge(net, e1.id, unit(rng) * e1.length_m);
      auto to = on_edge(net, e2.id, unit(rng) * e2.length_m);
      for (double sp_c : {25.0, 60.0}) {
        const double oracle = brute_force_time(net, from, to, sp_c);
        if (std::isfinite(oracle)) {
          CHECK(theoretical_travel_time(net, from, to, sp_c) == doctest::Approx(oracle).epsilon(1e-9));
          ++compared;
        } else {
          CHECK_THROWS_AS(theoretical_travel_time(net, from, to, sp_c), Error);
        }
      }
      // Raising the operator cap never slows the route down.
      const double oracle_slow = brute_force_time(net, from, to, 30.0);
      if (std::isfinite(oracle_slow)) {
        CHECK(theoretical_travel_time(net, from, to, 80.0) <= theoretical_travel_time(net, from, to, 30.0) + 1e-9);
      }
    }
  }
  CHECK(compared > 200);
}

TEST_CASE("direction-aware router") {
  auto net = make_network({{1, {0, 0}}, {2, {200, 0}}, {3, {400, 0}}}, {{1, 1, 2}, {2, 2, 3, 50, true}});
  Router router(net, 50.0);
  const NetworkLocation a{1, 50.0, Travel::forward};
  CHECK(router.cost(a, {1, 120.0, Travel::forward}, RouteMetric::distance) == doctest::Approx(70.0));
  CHECK(router.cost(a, {2, 100.0, Travel::forward}, RouteMetric::distance) ==
        doctest::Approx(net.edge(1).length_m - 50.0 + 100.0));
  // Turning back on a two-way edge requires a U-turn at a node.
  CHECK(router.cost(a, {1, 20.0, Travel::backward}, RouteMetric::distance) ==
        doctest::Approx(2 * net.edge(1).length_m - 50.0 - 20.0));
  CHECK(router.cost({1, 80.0, Travel::backward}, {1, 20.0, Travel::backward}, RouteMetric::distance) ==
        doctest::Approx(60.0));
  CHECK(router.cost(a, {1, 120.0, Travel::forward}, RouteMetric::distance, 30.0) == kInfinity);
  CHECK_THROWS_AS(router.search({2, 10.0, Travel::backward}, RouteMetric::distance), Error);
}
