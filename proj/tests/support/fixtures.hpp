// Shared helpers for building small networks in local metric coordinates.
#ifndef DTQS_TESTS_FIXTURES_HPP
#define DTQS_TESTS_FIXTURES_HPP

#include <utility>
#include <vector>

#include "dtqs/geo.hpp"
#include "dtqs/ingestion.hpp"
#include "dtqs/road_network.hpp"

namespace dtqs::test {

inline const LatLon kOrigin{48.85, 2.35};

inline LatLon at(double east_m, double north_m) { return offset_by_meters(kOrigin, east_m, north_m); }

struct EdgeSpec {
  EdgeId id;
  NodeId from;
  NodeId to;
  double speed_kmh = 50.0;
  bool oneway = false;
  std::vector<std::pair<double, double>> via = {};  // interior vertices, local meters
};

inline RoadNetwork make_network(const std::vector<std::pair<NodeId, std::pair<double, double>>>& nodes,
                                const std::vector<EdgeSpec>& edges) {
  std::vector<Node> ns;
  for (const auto& [id, xy] : nodes) ns.push_back({id, at(xy.first, xy.second)});
  auto pos = [&](NodeId id) {
    for (const auto& n : ns) {
      if (n.id == id) return n.position;
    }
    return LatLon{};
  };
  std::vector<Edge> es;
  for (const auto& spec : edges) {
    Edge e;
    e.id = spec.id;
    e.from = spec.from;
    e.to = spec.to;
    e.speed_limit_kmh = spec.speed_kmh;
    e.oneway = spec.oneway;
    e.geometry.push_back(pos(spec.from));
    for (const auto& [x, y] : spec.via) e.geometry.push_back(at(x, y));
    e.geometry.push_back(pos(spec.to));
    es.push_back(std::move(e));
  }
  return RoadNetwork(std::move(ns), std::move(es));
}

inline GpsFix fix_at(double east_m, double north_m, int timestamp = 0) {
  GpsFix f;
  f.parc = "P1";
  f.date = {2016, 3, 1};
  f.timestamp = timestamp;
  f.position = at(east_m, north_m);
  return f;
}

// West approach, dual one-way carriageways 14 m apart, roundabout at the east end.
inline RoadNetwork roundabout_network() {
  return make_network({{1, {-300, 0}}, {2, {0, 0}}, {3, {405, -17}}, {4, {405, 17}}, {5, {460, 0}}},
                      {{1, 1, 2},
                       {10, 2, 3, 50, true, {{20, -7}, {380, -7}}},
                       {11, 4, 2, 50, true, {{380, 7}, {20, 7}}},
                       {12, 3, 5, 30, true, {{440, -20}}},
                       {13, 5, 4, 30, true, {{440, 20}}},
                       {14, 4, 3, 30, true, {{395, 0}}}});
}

inline Trace trace_of(const std::vector<std::pair<double, double>>& xy, int dt = 10) {
  Trace t;
  t.key = {"12", "A", Direction::outbound, "C1", "R1", "P1", {2016, 3, 1}};
  int ts = 36000;
  for (const auto& [x, y] : xy) {
    t.fixes.push_back(fix_at(x, y, ts));
    ts += dt;
  }
  return t;
}

// Out along the south carriageway, round, and back west. The carriageway
// fixes sit closer to the wrong carriageway.
inline Trace roundabout_trace() {
  return trace_of({{-250, 0}, {-150, 0}, {-50, 0}, {50, 1}, {150, 1}, {250, 1}, {350, 1}, {443, -17},
                   {443, 17}, {350, -1}, {250, -1}, {150, -1}, {50, -1}, {-50, 0}, {-150, 0}});
}

inline const std::vector<EdgeId> kRoundaboutEdges{1, 1, 1, 10, 10, 10, 10, 12, 13, 11, 11, 11, 11, 1, 1};

}  // namespace dtqs::test

#endif  // DTQS_TESTS_FIXTURES_HPP
