#include "dtqs/map_matching.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "dtqs/error.hpp"

namespace dtqs {
namespace {

const std::string kModule = "map_matching";

constexpr double kSamePositionM = 1e-3;

void require_increasing(const std::vector<GpsFix>& fixes, std::string_view what) {
  for (std::size_t i = 1; i < fixes.size(); ++i) {
    if (fixes[i].timestamp <= fixes[i - 1].timestamp) {
      throw Error(kModule, ErrorCategory::contract,
                  fmt::format("{}: timestamps not strictly increasing at position {}", what, i));
    }
  }
}

Travel observed_travel(const RoadNetwork& net, const SnappedPoint& p, double heading) {
  return bearing_difference(heading, net.bearing_at(p.edge_id, p.offset_m)) <= 90.0 ? Travel::forward
                                                                                     : Travel::backward;
}

NetworkLocation location(const SnappedPoint& p, Travel t) { return {p.edge_id, p.offset_m, t}; }

}  // namespace

std::string_view to_string(MatchStatus status) {
  switch (status) {
    case MatchStatus::ok: return "ok";
    case MatchStatus::empty: return "empty";
    case MatchStatus::degenerate: return "degenerate";
    case MatchStatus::irreconcilable: return "irreconcilable";
  }
  return "unknown";
}

MatchedTrace snap_trace(const Trace& trace, const RoadNetwork& net, const MatchOptions& options) {
  if (!(options.snap_threshold_m > 0.0)) throw Error(kModule, ErrorCategory::input, "snap threshold must be positive");
  if (trace.fixes.empty()) throw Error(kModule, ErrorCategory::contract, "trace has no fixes");
  require_increasing(trace.fixes, trace.key.to_string());
  MatchedTrace out;
  out.key = trace.key;
  out.snap_threshold_m = options.snap_threshold_m;
  for (const auto& fix : trace.fixes) {
    auto cands = net.snap_candidates(fix, options.snap_threshold_m, std::max<std::size_t>(1, options.max_candidates));
    if (cands.empty()) {
      ++out.shredded_count;
      continue;
    }
    out.points.push_back(cands.front());
    out.candidates.push_back(std::move(cands));
  }
  if (out.points.empty()) {
    throw Error(kModule, ErrorCategory::degenerate,
                fmt::format("empty trace {}: all {} fixes beyond {} m", trace.key.to_string(), trace.fixes.size(),
                            options.snap_threshold_m));
  }
  return out;
}

MatchedTrace detect_surrounding_points(MatchedTrace matched, const RoadNetwork& net, double min_move_m) {
  const std::size_t n = matched.points.size();
  if (n < 2) {
    throw Error(kModule, ErrorCategory::degenerate,
                fmt::format("trace {} has {} point(s); direction is undefined", matched.key.to_string(), n));
  }
  matched.direction_tags.assign(n, Travel::forward);
  matched.heading_deg.assign(n, 0.0);
  const auto& pts = matched.points;

  // Headings need a minimum displacement; a standing vehicle keeps the last one.
  std::size_t ahead = 1;
  while (ahead < n && haversine(pts[0].snapped, pts[ahead].snapped) < min_move_m) ++ahead;
  matched.heading_deg[0] = ahead < n ? initial_bearing(pts[0].snapped, pts[ahead].snapped)
                                     : net.bearing_at(pts[0].edge_id, pts[0].offset_m);
  matched.direction_tags[0] = observed_travel(net, pts[0], matched.heading_deg[0]);

  std::size_t ref = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (haversine(pts[ref].snapped, pts[i].snapped) < min_move_m) {
      matched.heading_deg[i] = matched.heading_deg[i - 1];
      matched.direction_tags[i] = observed_travel(net, pts[i], matched.heading_deg[i]);
      continue;
    }
    matched.heading_deg[i] = initial_bearing(pts[ref].snapped, pts[i].snapped);
    matched.direction_tags[i] = observed_travel(net, pts[i], matched.heading_deg[i]);
    ref = i;
  }
  return matched;
}

MatchedTrace reorder_trace(MatchedTrace matched, const Router& router, const MatchOptions& options) {
  const RoadNetwork& net = router.network();
  const std::size_t n = matched.points.size();
  if (matched.direction_tags.size() != n || matched.heading_deg.size() != n || matched.candidates.size() != n) {
    throw Error(kModule, ErrorCategory::contract, "reorder_trace requires direction tags");
  }
  {
    std::vector<GpsFix> fixes;
    for (const auto& p : matched.points) fixes.push_back(p.source_fix);
    require_increasing(fixes, matched.key.to_string());
  }
  if (n == 0) {
    matched.ordered = true;
    return matched;
  }

  struct State {
    std::size_t candidate;
    Travel travel;
    double unary;
  };
  std::vector<std::vector<State>> states(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < matched.candidates[i].size(); ++c) {
      const SnappedPoint& cand = matched.candidates[i][c];
      const Travel seen = observed_travel(net, cand, matched.heading_deg[i]);
      for (Travel t : {Travel::forward, Travel::backward}) {
        if (!router.allows(location(cand, t))) continue;
        const double penalty = t == seen ? 0.0 : options.heading_penalty_m;
        states[i].push_back({c, t, cand.snap_distance_m + penalty});
      }
    }
  }
  auto loc_of = [&](std::size_t i, const State& s) { return location(matched.candidates[i][s.candidate], s.travel); };

  const double vmax_mps = net.max_speed_limit_kmh() / 3.6;
  std::vector<std::vector<double>> cost(n);
  std::vector<std::vector<std::size_t>> back(n);
  cost[0].resize(states[0].size());
  for (std::size_t s = 0; s < states[0].size(); ++s) cost[0][s] = states[0][s].unary;

  for (std::size_t i = 1; i < n; ++i) {
    const auto& prev = states[i - 1];
    const auto& cur = states[i];
    const double dt = matched.points[i].source_fix.timestamp - matched.points[i - 1].source_fix.timestamp;
    const double bound = options.speed_slack * vmax_mps * dt + 2.0 * matched.snap_threshold_m;
    // trans[p][s]; turning around is only considered when nothing else connects.
    std::vector<std::vector<double>> trans;
    for (bool allow_reversal : {false, true}) {
      trans.assign(prev.size(), std::vector<double>(cur.size(), kInfinity));
      for (std::size_t p = 0; p < prev.size(); ++p) {
        if (!std::isfinite(cost[i - 1][p])) continue;
        auto search = router.search(loc_of(i - 1, prev[p]), RouteMetric::distance, bound, allow_reversal);
        for (std::size_t s = 0; s < cur.size(); ++s) trans[p][s] = search.cost_to(loc_of(i, cur[s]));
      }
      for (std::size_t s = 0; s < cur.size(); ++s) {
        auto behind = router.search(loc_of(i, cur[s]), RouteMetric::distance, options.regress_tolerance_m, false);
        for (std::size_t p = 0; p < prev.size(); ++p) {
          if (!std::isfinite(cost[i - 1][p])) continue;
          trans[p][s] = std::min(trans[p][s], behind.cost_to(loc_of(i - 1, prev[p])));
        }
      }
      bool connected = false;
      for (std::size_t p = 0; p < prev.size() && !connected; ++p) {
        for (std::size_t s = 0; s < cur.size() && !connected; ++s) {
          connected = std::isfinite(cost[i - 1][p] + trans[p][s]);
        }
      }
      if (connected) break;
    }
    cost[i].assign(cur.size(), kInfinity);
    back[i].assign(cur.size(), 0);
    for (std::size_t s = 0; s < cur.size(); ++s) {
      for (std::size_t p = 0; p < prev.size(); ++p) {
        const double total = cost[i - 1][p] + trans[p][s] + cur[s].unary;
        if (total < cost[i][s]) {
          cost[i][s] = total;
          back[i][s] = p;
        }
      }
    }
    if (std::none_of(cost[i].begin(), cost[i].end(), [](double c) { return std::isfinite(c); })) {
      throw Error(kModule, ErrorCategory::validation,
                  fmt::format("irreconcilable ordering in trace {} at point {} ({})", matched.key.to_string(), i,
                              format_time_of_day(matched.points[i].source_fix.timestamp)));
    }
  }

  std::vector<std::size_t> chosen(n);
  chosen[n - 1] = static_cast<std::size_t>(std::min_element(cost[n - 1].begin(), cost[n - 1].end()) - cost[n - 1].begin());
  for (std::size_t i = n - 1; i > 0; --i) chosen[i - 1] = back[i][chosen[i]];

  // Progress: backward jitter keeps the furthest position reached so far.
  matched.progress_m.assign(n, 0.0);
  matched.progress_anchor.assign(n, 0);
  std::size_t anchor_index = 0;
  NetworkLocation anchor = loc_of(0, states[0][chosen[0]]);
  int anchor_time = matched.points[0].source_fix.timestamp;
  const double carry_tolerance = 4.0 * options.regress_tolerance_m;
  for (std::size_t i = 0; i < n; ++i) {
    const State& st = states[i][chosen[i]];
    const NetworkLocation loc = loc_of(i, st);
    matched.points[i] = matched.candidates[i][st.candidate];
    matched.direction_tags[i] = st.travel;
    if (i == 0) continue;
    matched.progress_anchor[i] = anchor_index;
    double step = 0.0;
    if (!std::isfinite(router.cost(loc, anchor, RouteMetric::distance, carry_tolerance, false))) {
      const int t = matched.points[i].source_fix.timestamp;
      const double bound = options.speed_slack * vmax_mps * (t - anchor_time) + 2.0 * matched.snap_threshold_m +
                           carry_tolerance;
      step = router.cost(anchor, loc, RouteMetric::distance, bound, false);
      if (!std::isfinite(step)) step = router.cost(anchor, loc, RouteMetric::distance, bound);
      if (!std::isfinite(step)) {
        step = router.cost(loc_of(i - 1, states[i - 1][chosen[i - 1]]), loc, RouteMetric::distance);
        matched.progress_anchor[i] = i - 1;
      }
      if (!std::isfinite(step)) step = 0.0;
      anchor = loc;
      anchor_index = i;
      anchor_time = t;
    }
    matched.progress_m[i] = matched.progress_m[i - 1] + step;
  }
  matched.ordered = true;
  return matched;
}

MatchOutcome match_trace(const Trace& trace, const Router& router, const MatchOptions& options) {
  MatchOutcome out;
  try {
    out.trace = snap_trace(trace, router.network(), options);
  } catch (const Error& ex) {
    if (ex.category() != ErrorCategory::degenerate) throw;
    out.trace.key = trace.key;
    out.trace.shredded_count = trace.fixes.size();
    out.status = MatchStatus::empty;
    out.message = ex.what();
    return out;
  }
  if (out.trace.points.size() < kMinMatchedPoints) {
    out.status = MatchStatus::degenerate;
    out.message = fmt::format("only {} matched point(s)", out.trace.points.size());
    return out;
  }
  MatchedTrace tagged = detect_surrounding_points(out.trace, router.network(), options.heading_min_move_m);
  try {
    out.trace = reorder_trace(std::move(tagged), router, options);
  } catch (const Error& ex) {
    if (ex.category() != ErrorCategory::validation) throw;
    out.status = MatchStatus::irreconcilable;
    out.message = ex.what();
  }
  return out;
}

std::string matched_trace_debug_geojson(const MatchedTrace& matched) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < matched.points.size(); ++i) {
    const auto& p = matched.points[i];
    nlohmann::json props = {{"index", i},
                            {"timestamp", format_time_of_day(p.source_fix.timestamp)},
                            {"edge_id", p.edge_id},
                            {"offset_m", p.offset_m},
                            {"snap_distance_m", p.snap_distance_m}};
    if (i < matched.direction_tags.size()) {
      props["travel"] = matched.direction_tags[i] == Travel::forward ? "forward" : "backward";
    }
    if (i < matched.progress_m.size()) props["progress_m"] = matched.progress_m[i];
    const auto raw = p.source_fix.position;
    auto feature = [&](const char* role, nlohmann::json geometry) {
      nlohmann::json f = {{"type", "Feature"}, {"geometry", std::move(geometry)}, {"properties", props}};
      f["properties"]["role"] = role;
      features.push_back(std::move(f));
    };
    feature("raw", {{"type", "Point"}, {"coordinates", {raw.lon, raw.lat}}});
    feature("snapped", {{"type", "Point"}, {"coordinates", {p.snapped.lon, p.snapped.lat}}});
    feature("link", {{"type", "LineString"},
                     {"coordinates", {{raw.lon, raw.lat}, {p.snapped.lon, p.snapped.lat}}}});
  }
  return nlohmann::json({{"type", "FeatureCollection"}, {"features", features}}).dump(1);
}

}  // namespace dtqs
