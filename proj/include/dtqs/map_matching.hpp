#ifndef DTQS_MAP_MATCHING_HPP
#define DTQS_MAP_MATCHING_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "dtqs/ingestion.hpp"
#include "dtqs/road_network.hpp"

namespace dtqs {

inline constexpr double kDefaultSnapThresholdM = 50.0;
inline constexpr double kHeadingMinMoveM = 8.0;

struct MatchOptions {
  double snap_threshold_m = kDefaultSnapThresholdM;
  std::size_t max_candidates = 6;
  // Feasible forward progress between fixes: speed_slack * vmax * dt + 2 * threshold.
  double speed_slack = 1.5;
  // Backward jitter accepted as standing still.
  double regress_tolerance_m = 30.0;
  // Unary cost added when a state's travel sense contradicts the observed heading.
  double heading_penalty_m = 5.0;
  // Displacement needed before a new movement bearing is taken.
  double heading_min_move_m = kHeadingMinMoveM;
};

struct MatchedTrace {
  RouteKey key;
  std::vector<SnappedPoint> points;
  std::vector<Travel> direction_tags;  // filled by detect_surrounding_points
  std::vector<double> progress_m;      // cumulative route distance, filled by reorder_trace
  std::vector<std::size_t> progress_anchor;  // point each step's distance is measured from
  std::vector<std::vector<SnappedPoint>> candidates;  // per point, nearest first
  std::vector<double> heading_deg;                    // observed movement bearing per point
  std::size_t shredded_count = 0;
  double snap_threshold_m = kDefaultSnapThresholdM;
  bool ordered = false;
};

/// Projects every fix onto the network. Fixes without a candidate within the
/// threshold are shredded; the kept point is the nearest candidate.
MatchedTrace snap_trace(const Trace& trace, const RoadNetwork& net, const MatchOptions& options = {});

/// Tags each point forward or backward by comparing its movement bearing with
/// the edge orientation (agreement within 90 degrees is forward). Bearings are
/// taken over at least min_move_m of displacement.
MatchedTrace detect_surrounding_points(MatchedTrace matched, const RoadNetwork& net,
                                       double min_move_m = kHeadingMinMoveM);

/// Chooses, per point, the candidate edge and travel sense that make the trace
/// a continuous forward drive; cumulative route distance is non-decreasing.
/// Throws validation error "irreconcilable" when no assignment exists.
MatchedTrace reorder_trace(MatchedTrace matched, const Router& router, const MatchOptions& options = {});

enum class MatchStatus { ok, empty, degenerate, irreconcilable };

std::string_view to_string(MatchStatus status);

struct MatchOutcome {
  MatchedTrace trace;
  MatchStatus status = MatchStatus::ok;
  std::string message;
};

inline constexpr std::size_t kMinMatchedPoints = 3;

/// Full pipeline for one trace; never throws for data-dependent failures.
MatchOutcome match_trace(const Trace& trace, const Router& router, const MatchOptions& options = {});

/// Raw fix, snapped point and connecting segment per point.
std::string matched_trace_debug_geojson(const MatchedTrace& matched);

}  // namespace dtqs

#endif  // DTQS_MAP_MATCHING_HPP
