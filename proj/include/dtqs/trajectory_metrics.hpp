#ifndef DTQS_TRAJECTORY_METRICS_HPP
#define DTQS_TRAJECTORY_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtqs/ingestion.hpp"
#include "dtqs/map_matching.hpp"
#include "dtqs/road_network.hpp"

namespace dtqs {

enum class PointFlag : std::uint8_t { none, stop_dwell, transit_short, transit_long };

std::string_view to_string(PointFlag flag);

/// Distance/time arrays of one matched trajectory. Step i runs from point
/// i-1 to point i; d[0] = t[0] = 0.
struct TrajectoryProfile {
  RouteKey key;
  std::vector<SnappedPoint> points;
  std::vector<NetworkLocation> locations;
  std::vector<std::size_t> anchor;  // per step, point the distance is measured from
  std::vector<double> d;
  std::vector<double> t;
  std::vector<double> d_c;
  std::vector<double> t_c;
  std::vector<PointFlag> flags;
  std::vector<std::uint8_t> dwell_step;  // per step, inside a stop-dwell window
  std::vector<double> approach_s;        // per dwell step, seconds before the station arrival

  std::vector<CourseEvent> station_events;
  std::optional<int> previous_end;  // last event of the previous trajectory of the vehicle-day
  std::optional<int> next_start;
  PointFlag leading_transit = PointFlag::transit_long;
  PointFlag trailing_transit = PointFlag::transit_long;
  bool transit_classified = false;
  std::size_t skipped_stations = 0;

  int first_event() const;
  int last_event() const;
};

TrajectoryProfile compute_profile(const MatchedTrace& matched);

struct DwellOptions {
  double radius_m = 30.0;
  double min_speed_mps = 0.5;
};

/// Flags one dwell window per station that has slow steps within radius of
/// its position: every step of that run of points, plus the entering and
/// leaving steps.
/// The station position is taken from the first point at or after the event.
void detect_stop_dwell(TrajectoryProfile& profile, const std::vector<CourseEvent>& events,
                       const DwellOptions& options = {});

inline constexpr int kTransitGapS = 30 * 60;

/// Classifies movement before the first and after the last station event of
/// every trajectory of one vehicle-day as short (gap to the neighbouring
/// trajectory <= gap_s) or long transit.
void classify_transit_periods(std::span<TrajectoryProfile> day, int gap_s = kTransitGapS);

/// Theoretical seconds per step along the matched route; NaN when no route
/// exists. Element 0 is 0.
std::vector<double> theoretical_step_times(const TrajectoryProfile& profile, const Router& router);

struct DelayBreakdown {
  double stop_dwell_s = 0.0;
  double transit_short_s = 0.0;
  double transit_long_s = 0.0;
  double point_delay_s = 0.0;
  double slack_s = 0.0;
  double total_s = 0.0;
  std::size_t excluded_steps = 0;
};

DelayBreakdown decompose_delay(const TrajectoryProfile& profile, std::span<const double> theo);

/// Distance along the route from the position at the first station event.
std::vector<double> route_positions(const TrajectoryProfile& profile);

/// point_index, lat, lon, d, t, d_c, t_c, flag
std::string profile_csv(const TrajectoryProfile& profile);

struct PooledPoint {
  std::size_t profile = 0;
  std::size_t point = 0;
  double position_m = 0.0;
};

/// Unflagged points of all profiles grouped by route label, ordered by
/// position, then profile, then point.
std::map<std::string, std::vector<PooledPoint>> pool_route_points(std::span<const TrajectoryProfile> profiles);

inline constexpr std::size_t kMinTraversals = 8;

struct ClusterSample {
  std::string route_label;
  std::size_t index = 0;
  double lo_m = 0.0;
  double hi_m = 0.0;
  std::size_t point_count = 0;
  std::vector<double> theo;
  std::vector<double> real;
  std::vector<std::size_t> profiles;  // one traversal each

  std::string id() const;
  bool testable(std::size_t n_min = kMinTraversals) const { return real.size() >= n_min; }
};

/// One (theoretical, real) pair per trajectory and cluster. Every unflagged
/// step is charged to whichever endpoint carries more excess time, so a
/// standstill is counted once, in the cluster where it happened.
/// `labels[i]` is the cluster of `pooled[i]`, in 0..k-1.
std::vector<ClusterSample> point_delay_samples(std::span<const TrajectoryProfile> profiles,
                                               std::span<const std::vector<double>> theo,
                                               const std::string& route_label, std::span<const PooledPoint> pooled,
                                               std::span<const std::size_t> labels, std::size_t k);

}  // namespace dtqs

#endif  // DTQS_TRAJECTORY_METRICS_HPP
