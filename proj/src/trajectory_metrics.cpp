#include "dtqs/trajectory_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dtqs/error.hpp"

namespace dtqs {
namespace {

const std::string kModule = "trajectory_metrics";

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct StepSplit {
  double leading = 0.0;   // seconds before the first station event
  double trailing = 0.0;  // seconds after the last station event
  double remainder = 0.0;
};

StepSplit split_step(const TrajectoryProfile& p, std::size_t i) {
  StepSplit s;
  const double total = p.t[i];
  if (p.transit_classified) {
    const double a = p.points[i - 1].source_fix.timestamp;
    const double b = p.points[i].source_fix.timestamp;
    const double first = p.first_event();
    const double last = p.last_event();
    s.leading = std::max(0.0, std::min(b, first) - a);
    s.trailing = std::max(0.0, b - std::max(a, last));
  }
  s.remainder = total - s.leading - s.trailing;
  return s;
}

}  // namespace

std::string_view to_string(PointFlag flag) {
  switch (flag) {
    case PointFlag::none: return "none";
    case PointFlag::stop_dwell: return "std";
    case PointFlag::transit_short: return "tps";
    case PointFlag::transit_long: return "tpl";
  }
  return "unknown";
}

int TrajectoryProfile::first_event() const {
  if (station_events.empty()) throw Error(kModule, ErrorCategory::contract, "profile has no station events");
  return station_events.front().timestamp;
}

int TrajectoryProfile::last_event() const {
  if (station_events.empty()) throw Error(kModule, ErrorCategory::contract, "profile has no station events");
  return station_events.back().timestamp;
}

TrajectoryProfile compute_profile(const MatchedTrace& matched) {
  const std::size_t n = matched.points.size();
  if (!matched.ordered || matched.progress_m.size() != n || matched.direction_tags.size() != n) {
    throw Error(kModule, ErrorCategory::contract, "compute_profile requires an ordered matched trace");
  }
  if (n < 2) throw Error(kModule, ErrorCategory::degenerate, fmt::format("profile needs 2 points, got {}", n));
  TrajectoryProfile p;
  p.key = matched.key;
  p.points = matched.points;
  p.d.assign(n, 0.0);
  p.t.assign(n, 0.0);
  p.d_c.assign(n, 0.0);
  p.t_c.assign(n, 0.0);
  p.flags.assign(n, PointFlag::none);
  p.dwell_step.assign(n, 0);
  p.approach_s.assign(n, 0.0);
  p.anchor.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    p.locations.push_back({matched.points[i].edge_id, matched.points[i].offset_m, matched.direction_tags[i]});
    if (i == 0) continue;
    const int dt = matched.points[i].source_fix.timestamp - matched.points[i - 1].source_fix.timestamp;
    if (dt <= 0) {
      throw Error(kModule, ErrorCategory::contract,
                  fmt::format("trace {}: timestamps not increasing at point {}", matched.key.to_string(), i));
    }
    const double dd = matched.progress_m[i] - matched.progress_m[i - 1];
    if (dd < 0.0) {
      throw Error(kModule, ErrorCategory::contract,
                  fmt::format("trace {}: route distance regresses at point {}", matched.key.to_string(), i));
    }
    p.d[i] = dd;
    p.t[i] = dt;
    p.d_c[i] = p.d_c[i - 1] + dd;
    p.t_c[i] = p.t_c[i - 1] + dt;
    p.anchor[i] = i < matched.progress_anchor.size() ? matched.progress_anchor[i] : i - 1;
  }
  return p;
}

void detect_stop_dwell(TrajectoryProfile& profile, const std::vector<CourseEvent>& events, const DwellOptions& options) {
  profile.station_events = events;
  std::stable_sort(profile.station_events.begin(), profile.station_events.end(),
                   [](const CourseEvent& a, const CourseEvent& b) { return a.timestamp < b.timestamp; });
  const std::size_t n = profile.points.size();
  for (const auto& ev : profile.station_events) {
    auto it = std::find_if(profile.points.begin(), profile.points.end(),
                           [&](const SnappedPoint& p) { return p.source_fix.timestamp >= ev.timestamp; });
    if (it == profile.points.end()) {
      ++profile.skipped_stations;
      spdlog::warn("{}: station '{}' at {} has no fix to locate it; skipped", profile.key.to_string(),
                   ev.station_name, format_time_of_day(ev.timestamp));
      continue;
    }
    const std::size_t s = static_cast<std::size_t>(it - profile.points.begin());
    const LatLon station = profile.points[s].snapped;
    auto inside = [&](std::size_t i) { return haversine(profile.points[i].snapped, station) <= options.radius_m; };
    std::size_t lo = s, hi = s;
    while (lo > 0 && inside(lo - 1)) --lo;
    while (hi + 1 < n && inside(hi + 1)) ++hi;
    std::size_t first_slow = 0, last_slow = 0;
    for (std::size_t i = lo + 1; i <= hi; ++i) {
      if (profile.d[i] < options.min_speed_mps * profile.t[i]) {
        if (first_slow == 0) first_slow = i;
        last_slow = i;
      }
    }
    if (first_slow == 0) continue;
    // Jitter at a standstill can look like movement, so the window spans the
    // whole run inside the radius plus the steps entering and leaving it.
    const std::size_t step_lo = std::max<std::size_t>(1, lo);
    const std::size_t step_hi = std::min(n - 1, hi + 1);
    for (std::size_t i = step_lo; i <= step_hi; ++i) profile.dwell_step[i] = 1;
    const double a = profile.points[step_lo - 1].source_fix.timestamp;
    const double b = profile.points[step_lo].source_fix.timestamp;
    if (a < ev.timestamp && ev.timestamp < b) profile.approach_s[step_lo] = ev.timestamp - a;
    for (std::size_t i = step_lo - 1; i <= step_hi; ++i) {
      if (profile.flags[i] == PointFlag::none) profile.flags[i] = PointFlag::stop_dwell;
    }
  }
}

void classify_transit_periods(std::span<TrajectoryProfile> day, int gap_s) {
  if (gap_s < 0) throw Error(kModule, ErrorCategory::input, "transit gap must be non-negative");
  std::vector<std::size_t> order(day.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& p : day) {
    if (p.station_events.empty()) throw Error(kModule, ErrorCategory::contract, "transit needs station events");
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return day[a].first_event() < day[b].first_event(); });
  for (std::size_t r = 0; r < order.size(); ++r) {
    TrajectoryProfile& p = day[order[r]];
    std::optional<int> prev = p.previous_end;
    std::optional<int> next = p.next_start;
    if (r > 0) {
      const int sib = day[order[r - 1]].last_event();
      prev = prev ? std::max(*prev, sib) : sib;
    }
    if (r + 1 < order.size()) {
      const int sib = day[order[r + 1]].first_event();
      next = next ? std::min(*next, sib) : sib;
    }
    p.previous_end = prev;
    p.next_start = next;
    p.leading_transit =
        prev && p.first_event() - *prev <= gap_s ? PointFlag::transit_short : PointFlag::transit_long;
    p.trailing_transit =
        next && *next - p.last_event() <= gap_s ? PointFlag::transit_short : PointFlag::transit_long;
    p.transit_classified = true;
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      const int ts = p.points[i].source_fix.timestamp;
      if (ts < p.first_event()) {
        p.flags[i] = p.leading_transit;
      } else if (ts > p.last_event()) {
        p.flags[i] = p.trailing_transit;
      }
    }
  }
}

std::vector<double> theoretical_step_times(const TrajectoryProfile& profile, const Router& router) {
  const std::size_t n = profile.points.size();
  std::vector<double> theo(n, 0.0);
  double max_spm = 0.0;
  for (std::size_t e = 0; e < router.network().edges().size(); ++e) {
    max_spm = std::max(max_spm, router.weight_per_meter(e, RouteMetric::time));
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (profile.d[i] <= 0.0) continue;
    // Time along the distance-shortest path bounds the fastest path from above.
    const double bound = profile.d[i] * max_spm * (1.0 + 1e-9) + 1e-6;
    const auto& from = profile.locations[profile.anchor[i]];
    double c = router.cost(from, profile.locations[i], RouteMetric::time, bound, false);
    if (!std::isfinite(c)) c = router.cost(from, profile.locations[i], RouteMetric::time, bound);
    theo[i] = std::isfinite(c) ? c : kNaN;
  }
  return theo;
}

DelayBreakdown decompose_delay(const TrajectoryProfile& profile, std::span<const double> theo) {
  const std::size_t n = profile.points.size();
  if (theo.size() != n) throw Error(kModule, ErrorCategory::contract, "theoretical times do not match the profile");
  DelayBreakdown b;
  auto add_transit = [&](PointFlag kind, double seconds) {
    (kind == PointFlag::transit_short ? b.transit_short_s : b.transit_long_s) += seconds;
  };
  for (std::size_t i = 1; i < n; ++i) {
    b.total_s += profile.t[i];
    const StepSplit s = split_step(profile, i);
    if (s.leading > 0.0) add_transit(profile.leading_transit, s.leading);
    if (s.trailing > 0.0) add_transit(profile.trailing_transit, s.trailing);
    if (s.remainder <= 0.0) continue;
    if (!std::isfinite(theo[i])) {
      b.slack_s += s.remainder;
      ++b.excluded_steps;
      continue;
    }
    const double excess = std::max(0.0, s.remainder - theo[i]);
    if (profile.dwell_step[i]) {
      // only the time after the arrival event is dwell
      const double approach = i < profile.approach_s.size() ? profile.approach_s[i] : 0.0;
      const double dwell = std::min(excess, std::max(0.0, s.remainder - approach));
      b.stop_dwell_s += dwell;
      b.point_delay_s += excess - dwell;
    } else {
      b.point_delay_s += excess;
    }
    b.slack_s += s.remainder - excess;
  }
  return b;
}

std::vector<double> route_positions(const TrajectoryProfile& profile) {
  const std::size_t n = profile.points.size();
  std::size_t ref = 0;
  if (!profile.station_events.empty()) {
    const int first = profile.first_event();
    for (std::size_t i = 0; i < n; ++i) {
      if (profile.points[i].source_fix.timestamp <= first) ref = i;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = profile.d_c[i] - profile.d_c[ref];
  return out;
}

std::string profile_csv(const TrajectoryProfile& profile) {
  std::string out = "point_index,lat,lon,d,t,d_c,t_c,flag\n";
  for (std::size_t i = 0; i < profile.points.size(); ++i) {
    const auto& p = profile.points[i].snapped;
    out += fmt::format("{},{:.7f},{:.7f},{:.3f},{:.0f},{:.3f},{:.0f},{}\n", i, p.lat, p.lon, profile.d[i], profile.t[i],
                       profile.d_c[i], profile.t_c[i], to_string(profile.flags[i]));
  }
  return out;
}

std::map<std::string, std::vector<PooledPoint>> pool_route_points(std::span<const TrajectoryProfile> profiles) {
  std::map<std::string, std::vector<PooledPoint>> pools;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto& p = profiles[k];
    const auto pos = route_positions(p);
    auto& pool = pools[p.key.route_label()];
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      if (p.flags[i] == PointFlag::none) pool.push_back({k, i, pos[i]});
    }
  }
  for (auto& [label, pool] : pools) {
    std::sort(pool.begin(), pool.end(), [](const PooledPoint& a, const PooledPoint& b) {
      if (a.position_m != b.position_m) return a.position_m < b.position_m;
      if (a.profile != b.profile) return a.profile < b.profile;
      return a.point < b.point;
    });
  }
  return pools;
}

std::string ClusterSample::id() const { return fmt::format("{}:{}", route_label, index); }

std::vector<ClusterSample> point_delay_samples(std::span<const TrajectoryProfile> profiles,
                                               std::span<const std::vector<double>> theo,
                                               const std::string& route_label, std::span<const PooledPoint> pooled,
                                               std::span<const std::size_t> labels, std::size_t k) {
  if (labels.size() != pooled.size()) throw Error(kModule, ErrorCategory::contract, "one label per pooled point");
  if (theo.size() != profiles.size()) throw Error(kModule, ErrorCategory::contract, "one theo vector per profile");
  std::vector<ClusterSample> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    out[c].route_label = route_label;
    out[c].index = c;
    out[c].lo_m = kInfinity;
    out[c].hi_m = -kInfinity;
  }
  // point -> cluster per profile
  std::map<std::size_t, std::vector<long>> cluster_of;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const auto& pp = pooled[i];
    if (labels[i] >= k) throw Error(kModule, ErrorCategory::contract, "cluster label out of range");
    auto& v = cluster_of[pp.profile];
    if (v.empty()) v.assign(profiles[pp.profile].points.size(), -1);
    v[pp.point] = static_cast<long>(labels[i]);
    ClusterSample& cs = out[labels[i]];
    cs.lo_m = std::min(cs.lo_m, pp.position_m);
    cs.hi_m = std::max(cs.hi_m, pp.position_m);
    ++cs.point_count;
  }

  for (const auto& [pi, membership] : cluster_of) {
    const TrajectoryProfile& p = profiles[pi];
    const auto& th = theo[pi];
    const std::size_t n = p.points.size();
    std::vector<double> excess(n + 1, 0.0);  // excess of step i, zero where flagged
    std::vector<std::uint8_t> usable(n, 0);
    for (std::size_t i = 1; i < n; ++i) {
      const StepSplit s = split_step(p, i);
      if (p.dwell_step[i] || s.leading > 0.0 || s.trailing > 0.0 || !std::isfinite(th[i])) continue;
      usable[i] = 1;
      excess[i] = std::max(0.0, p.t[i] - th[i]);
    }
    std::vector<double> real_sum(k, 0.0), theo_sum(k, 0.0);
    std::vector<std::uint8_t> touched(k, 0);
    for (std::size_t i = 1; i < n; ++i) {
      if (!usable[i]) continue;
      const double score_start = excess[i - 1] + excess[i];
      const double score_end = excess[i] + excess[i + 1];
      long c_first = membership[i - 1], c_second = membership[i];
      if (score_end > score_start) std::swap(c_first, c_second);
      const long c = c_first >= 0 ? c_first : c_second;
      if (c < 0) continue;
      real_sum[c] += p.t[i];
      theo_sum[c] += th[i];
      touched[c] = 1;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (!touched[c]) continue;
      out[c].real.push_back(real_sum[c]);
      out[c].theo.push_back(theo_sum[c]);
      out[c].profiles.push_back(pi);
    }
  }
  return out;
}

}  // namespace dtqs
