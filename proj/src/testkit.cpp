#include "dtqs/testkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "dtqs/csv.hpp"
#include "dtqs/error.hpp"
#include "dtqs/io.hpp"

namespace dtqs::testkit {
namespace {

const std::string kModule = "testkit";

[[noreturn]] void fail(ErrorCategory c, const std::string& msg) { throw Error(kModule, c, msg); }

struct PathEdge {
  EdgeId id = 0;
  bool forward = true;
  double start_m = 0.0;
  double length_m = 0.0;
  double speed_mps = 0.0;  // effective limit
};

// A node sequence laid out along one direction of travel.
struct Path {
  std::vector<NodeId> nodes;
  std::vector<PathEdge> edges;
  std::vector<double> node_pos;
  double length_m = 0.0;

  // (edge index, distance into that edge)
  std::pair<std::size_t, double> locate(double s) const {
    s = std::clamp(s, 0.0, length_m);
    auto it = std::upper_bound(node_pos.begin(), node_pos.end(), s);
    std::size_t k = it == node_pos.begin() ? 0 : static_cast<std::size_t>(it - node_pos.begin()) - 1;
    k = std::min(k, edges.size() - 1);
    return {k, s - edges[k].start_m};
  }
};

std::optional<Path> make_path(const RoadNetwork& net, const std::vector<NodeId>& nodes, double spc_kmh,
                              std::string* why = nullptr) {
  Path p;
  p.nodes = nodes;
  p.node_pos.push_back(0.0);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const NodeId a = nodes[i], b = nodes[i + 1];
    const Edge* best = nullptr;
    bool forward = true;
    for (const auto& e : net.edges()) {
      const bool fwd = e.from == a && e.to == b;
      const bool bwd = e.from == b && e.to == a && !e.oneway;
      if ((fwd || bwd) && (!best || e.length_m < best->length_m)) {
        best = &e;
        forward = fwd;
      }
    }
    if (!best) {
      if (why) *why = fmt::format("route nodes {} and {} are not connected in the travel direction", a, b);
      return std::nullopt;
    }
    p.edges.push_back({best->id, forward, p.length_m, best->length_m,
                       effective_speed(best->speed_limit_kmh, spc_kmh) / 3.6});
    p.length_m += best->length_m;
    p.node_pos.push_back(p.length_m);
  }
  return p;
}

struct Waypoint {
  double t;
  double s;
};

// Piecewise-linear position along one path; no path means no fixes.
struct Leg {
  const Path* path = nullptr;
  std::vector<Waypoint> wps;
  double begin() const { return wps.front().t; }
  double end() const { return wps.back().t; }
};

double position_on(const Leg& leg, double t) {
  const auto& w = leg.wps;
  auto it = std::upper_bound(w.begin(), w.end(), t, [](double v, const Waypoint& p) { return v < p.t; });
  if (it == w.begin()) return w.front().s;
  if (it == w.end()) return w.back().s;
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  if (b.t <= a.t) return b.s;
  return a.s + (b.s - a.s) * (t - a.t) / (b.t - a.t);
}

Leg stationary(const Path* path, double s, double t0, double t1) { return {path, {{t0, s}, {t1, s}}}; }

Leg drive(const Path& path, double t0, double factor) {
  Leg leg{&path, {{t0, 0.0}}};
  double t = t0;
  for (const auto& e : path.edges) {
    t += e.length_m / (e.speed_mps * factor);
    leg.wps.push_back({t, e.start_m + e.length_m});
  }
  return leg;
}

struct TripPlan {
  std::size_t vehicle = 0;
  std::size_t day = 0;
  std::size_t slot = 0;  // trip number within the vehicle-day
  bool inbound = false;
};

struct SimTrip {
  TripPlan plan;
  Leg leg;
  std::vector<std::pair<NodeId, int>> station_times;  // station node, event second
  double std_s = 0.0;
  double pd_s = 0.0;
};

CalendarDate add_days(CalendarDate d, std::size_t n) {
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  for (std::size_t i = 0; i < n; ++i) {
    const bool leap = (d.year % 4 == 0 && d.year % 100 != 0) || d.year % 400 == 0;
    const int len = kDays[d.month - 1] + (d.month == 2 && leap ? 1 : 0);
    if (++d.day > len) {
      d.day = 1;
      if (++d.month > 12) {
        d.month = 1;
        ++d.year;
      }
    }
  }
  return d;
}

void validate(const ScenarioSpec& s) {
  auto bad = [](const std::string& m) { fail(ErrorCategory::config, m); };
  if (!s.network && s.node_count < 3) bad("node_count must be at least 3");
  if (!s.network && !(s.node_spacing_m > 0.0)) bad("node_spacing_m must be positive");
  if (s.network && s.route_nodes.size() < 2) bad("a custom network needs at least 2 route nodes");
  if (s.sampling_min_s < 9 || s.sampling_max_s > 20 || s.sampling_min_s > s.sampling_max_s) {
    bad("sampling period must lie within 9..20 s");
  }
  if (s.station_every == 0) bad("station_every must be positive");
  if (s.trajectories == 0 || s.vehicles == 0 || s.trips_per_day == 0) bad("trajectories, vehicles and trips_per_day must be positive");
  if (!(s.noise_sd_m >= 0.0) || !(s.outlier_fraction >= 0.0 && s.outlier_fraction < 1.0)) bad("invalid noise settings");
  if (!(s.dwell_min_s > 0.0) || s.dwell_max_s < s.dwell_min_s) bad("invalid dwell range");
  if (!(s.delay_s >= 0.0) || !(s.delay_jitter >= 0.0 && s.delay_jitter < 1.0)) bad("invalid delay settings");
  if (!(s.operator_speed_kmh > 0.0)) bad("operator speed must be positive");
  if (!(s.delay_node_fraction >= 0.0 && s.delay_node_fraction <= 1.0)) bad("delay_node_fraction must be in [0, 1]");
  if (s.shares) {
    const auto& t = *s.shares;
    if (!(t.point_pct >= 0 && t.stop_pct > 0 && t.others_pct > 0) ||
        std::fabs(t.point_pct + t.stop_pct + t.others_pct - 100.0) > 1e-6) {
      bad("share targets must be non-negative and sum to 100");
    }
  }
}

RoadNetwork corridor(const ScenarioSpec& s, std::vector<NodeId>& route) {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  const double amp = 0.3 * s.node_spacing_m;
  for (std::size_t i = 0; i < s.node_count; ++i) {
    const double x = static_cast<double>(i) * s.node_spacing_m;
    const double y = amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 20.0);
    nodes.push_back({static_cast<NodeId>(i + 1), offset_by_meters(s.origin, x, y)});
    route.push_back(static_cast<NodeId>(i + 1));
  }
  for (std::size_t i = 0; i + 1 < s.node_count; ++i) {
    Edge e;
    e.id = static_cast<EdgeId>(i + 1);
    e.from = static_cast<NodeId>(i + 1);
    e.to = static_cast<NodeId>(i + 2);
    e.speed_limit_kmh = i % 7 == 3 ? s.slow_speed_limit_kmh : s.speed_limit_kmh;
    edges.push_back(std::move(e));
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

// Residual time from the claim-window start to the first fix, averaged over
// a uniform integer sampling period.
double expected_window_lead(const ScenarioSpec& s) {
  double m1 = 0.0, m2 = 0.0;
  for (int p = s.sampling_min_s; p <= s.sampling_max_s; ++p) {
    m1 += p;
    m2 += static_cast<double>(p) * p;
  }
  return static_cast<double>(kClaimMarginS) - m2 / (2.0 * m1);
}

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec) {
  validate(spec);
  Scenario sc;
  sc.spec = spec;
  sc.spec.network.reset();
  if (spec.network) {
    sc.network = *spec.network;
    sc.route_nodes = spec.route_nodes;
  } else {
    sc.network = corridor(spec, sc.route_nodes);
  }
  const auto& net = sc.network;
  std::string why;
  auto out_path = make_path(net, sc.route_nodes, spec.operator_speed_kmh, &why);
  if (!out_path) fail(ErrorCategory::validation, why);
  std::vector<NodeId> reversed(sc.route_nodes.rbegin(), sc.route_nodes.rend());
  auto in_path = make_path(net, reversed, spec.operator_speed_kmh, &why);
  if (spec.both_directions && !in_path) fail(ErrorCategory::validation, "inbound route: " + why);
  const Path& outbound = *out_path;
  const std::size_t n_nodes = sc.route_nodes.size();
  sc.truth.route_length_m = outbound.length_m;

  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  // Stations at route index multiples plus both terminals.
  std::vector<bool> is_station(n_nodes, false);
  for (std::size_t i = 0; i < n_nodes; ++i) is_station[i] = i % spec.station_every == 0 || i + 1 == n_nodes;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (is_station[i]) sc.station_nodes.push_back(sc.route_nodes[i]);
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n_nodes; ++i) {
    if (!is_station[i]) candidates.push_back(i);
  }
  // Random picks keep clear of stations, where a delay merges with the dwell.
  std::vector<std::size_t> clear;
  for (std::size_t i : candidates) {
    if (!is_station[i - 1] && !is_station[i + 1]) clear.push_back(i);
  }

  // Delay nodes by route index.
  std::vector<std::size_t> delay_idx;
  if (!spec.delay_nodes.empty()) {
    for (NodeId id : spec.delay_nodes) {
      auto it = std::find(sc.route_nodes.begin(), sc.route_nodes.end(), id);
      if (it == sc.route_nodes.end()) fail(ErrorCategory::config, fmt::format("delay node {} is not on the route", id));
      const auto idx = static_cast<std::size_t>(it - sc.route_nodes.begin());
      if (is_station[idx]) fail(ErrorCategory::config, fmt::format("delay node {} is a station", id));
      delay_idx.push_back(idx);
    }
  } else if (spec.shares) {
    delay_idx = candidates;
  } else {
    const auto want = static_cast<std::size_t>(std::llround(spec.delay_node_fraction * static_cast<double>(n_nodes)));
    // Non-adjacent picks keep each delay in its own stretch of road.
    std::vector<std::size_t> pool = clear;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t idx : pool) {
      if (delay_idx.size() >= want) break;
      const bool near = std::any_of(delay_idx.begin(), delay_idx.end(),
                                    [&](std::size_t d) { return d + 1 == idx || idx + 1 == d; });
      if (!near) delay_idx.push_back(idx);
    }
  }
  std::sort(delay_idx.begin(), delay_idx.end());
  std::vector<double> node_delay(n_nodes, 0.0);
  std::vector<double> node_dwell_share(n_nodes, 0.0);

  double share_stop_total = 0.0, share_point_total = 0.0;
  if (spec.shares) {
    double theo = 0.0;
    for (const auto& e : outbound.edges) theo += e.length_m / e.speed_mps;
    const double others = theo + 2.0 * expected_window_lead(spec);
    share_stop_total = others * spec.shares->stop_pct / spec.shares->others_pct;
    share_point_total = others * spec.shares->point_pct / spec.shares->others_pct;
    // Fixed weights per node so every trajectory carries the same totals.
    double wsum = 0.0;
    for (std::size_t i = 1; i + 1 < n_nodes; ++i) {
      if (is_station[i]) wsum += node_dwell_share[i] = uniform(0.8, 1.2);
    }
    for (auto& w : node_dwell_share) w /= wsum;
    double dsum = 0.0;
    for (std::size_t i : delay_idx) dsum += node_delay[i] = uniform(0.8, 1.2);
    for (std::size_t i : delay_idx) node_delay[i] *= share_point_total / dsum;
  } else {
    for (std::size_t i : delay_idx) node_delay[i] = spec.delay_s;
  }
  for (std::size_t i : delay_idx) {
    InjectedDelay d;
    d.node = sc.route_nodes[i];
    d.delay_s = node_delay[i];
    d.outbound_position_m = outbound.node_pos[i];
    d.inbound_position_m = outbound.length_m - outbound.node_pos[i];
    sc.truth.injected.push_back(d);
  }

  // Trip schedule.
  std::vector<std::vector<TripPlan>> vehicle_days;
  {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;  // (day, vehicle) -> vehicle_days slot
    for (std::size_t g = 0; g < spec.trajectories; ++g) {
      TripPlan p;
      p.slot = g % spec.trips_per_day;
      p.vehicle = (g / spec.trips_per_day) % spec.vehicles;
      p.day = g / (spec.trips_per_day * spec.vehicles);
      p.inbound = spec.both_directions && p.slot % 2 == 1;
      const auto key = std::make_pair(p.day, p.vehicle);
      auto [it, fresh] = index.emplace(key, vehicle_days.size());
      if (fresh) vehicle_days.emplace_back();
      vehicle_days[it->second].push_back(p);
    }
  }

  const Path* inbound = in_path ? &*in_path : nullptr;
  const double deadhead_s = inbound ? drive(*inbound, 0.0, 1.0).end() : 300.0;
  const double min_layover = kClaimMarginS + 30.0;

  struct DayResult {
    std::vector<Leg> legs;
    std::vector<SimTrip> trips;
    std::string parc;
    CalendarDate date;
  };
  std::vector<DayResult> days;
  for (const auto& plans : vehicle_days) {
    DayResult day;
    const auto& first = plans.front();
    day.parc = fmt::format("P{:02}", first.vehicle + 1);
    day.date = add_days(spec.first_date, first.day);
    const double day_start = 6 * 3600.0 + 420.0 * static_cast<double>(first.vehicle) + std::floor(uniform(0.0, 300.0));
    double t = day_start + std::floor(uniform(min_layover, 400.0));
    day.legs.push_back(stationary(&outbound, 0.0, day_start, t));
    double last_event = 0.0;
    for (std::size_t j = 0; j < plans.size(); ++j) {
      const auto& plan = plans[j];
      const Path& path = plan.inbound ? *inbound : outbound;
      if (j > 0) {
        // Gap from the previous last event to this first event.
        const bool turn = plans[j - 1].inbound != plan.inbound;
        const double travel = turn ? 0.0 : deadhead_s;
        const double min_gap = 2.0 * min_layover + travel + 60.0;
        double gap = 0.0;
        if (uniform(0.0, 1.0) < spec.short_gap_probability) {
          gap = uniform(std::max(min_gap, 360.0), std::max(min_gap + 60.0, 25.0 * 60.0));
        } else {
          gap = uniform(std::max(min_gap, 35.0 * 60.0), std::max(min_gap + 60.0, 90.0 * 60.0));
        }
        const double next = std::floor(last_event + gap);
        const Path& prev_path = plans[j - 1].inbound ? *inbound : outbound;
        if (turn) {
          day.legs.push_back(stationary(&path, 0.0, t, next));
        } else {
          const double post = std::floor(uniform(min_layover, std::min(400.0, next - t - travel - min_layover)));
          day.legs.push_back(stationary(&prev_path, prev_path.length_m, t, t + post));
          const Path* back = plan.inbound ? &outbound : inbound;
          if (back) {
            Leg dh = drive(*back, t + post, 1.0);
            day.legs.push_back(dh);
            day.legs.push_back(stationary(&path, 0.0, dh.end(), next));
          } else {
            day.legs.push_back({nullptr, {{t + post, 0.0}, {t + post + travel, 0.0}}});
            day.legs.push_back(stationary(&path, 0.0, t + post + travel, next));
          }
        }
        t = next;
      }

      SimTrip trip;
      trip.plan = plan;
      const double factor = std::clamp(1.0 + std::normal_distribution<double>(0.0, spec.speed_jitter_sd)(rng), 0.85, 1.15);
      // Route index of node k along this path.
      auto route_index = [&](std::size_t k) { return plan.inbound ? n_nodes - 1 - k : k; };
      Leg leg{&path, {{t, 0.0}}};
      trip.station_times.push_back({path.nodes[0], static_cast<int>(std::llround(t))});
      for (std::size_t k = 0; k < path.edges.size(); ++k) {
        if (k > 0) {
          const std::size_t ri = route_index(k);
          const double s = path.node_pos[k];
          if (is_station[ri]) {
            trip.station_times.push_back({path.nodes[k], static_cast<int>(std::llround(t))});
            const double dwell = spec.shares ? share_stop_total * node_dwell_share[ri] * uniform(0.95, 1.05)
                                             : uniform(spec.dwell_min_s, spec.dwell_max_s);
            t += dwell;
            trip.std_s += dwell;
            leg.wps.push_back({t, s});
          }
          if (node_delay[ri] > 0.0) {
            const double d = spec.shares ? node_delay[ri] * uniform(0.95, 1.05)
                                         : node_delay[ri] * uniform(1.0 - spec.delay_jitter, 1.0 + spec.delay_jitter);
            t += d;
            trip.pd_s += d;
            leg.wps.push_back({t, s});
          }
        }
        const auto& e = path.edges[k];
        t += e.length_m / (e.speed_mps * factor);
        leg.wps.push_back({t, e.start_m + e.length_m});
      }
      trip.station_times.push_back({path.nodes.back(), static_cast<int>(std::llround(t))});
      last_event = static_cast<double>(trip.station_times.back().second);
      day.legs.push_back(leg);
      trip.leg = std::move(leg);
      day.trips.push_back(std::move(trip));
    }
    const Path& end_path = plans.back().inbound ? *inbound : outbound;
    const double end = t + std::floor(uniform(min_layover, 400.0));
    day.legs.push_back(stationary(&end_path, end_path.length_m, t, end));
    if (end >= kSecondsPerDay - 1) {
      fail(ErrorCategory::config, fmt::format("vehicle day for {} runs past midnight; lower trips_per_day", day.parc));
    }
    days.push_back(std::move(day));
  }

  // Fixes and events.
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto& day : days) {
    const std::size_t trip_base = sc.truth.trajectories.size();
    for (std::size_t j = 0; j < day.trips.size(); ++j) {
      const auto& trip = day.trips[j];
      RouteKey key{spec.line, spec.subline, trip.plan.inbound ? Direction::inbound : Direction::outbound,
                   fmt::format("C{}", trip.plan.vehicle + 1), std::to_string(trip.plan.slot + 1), day.parc, day.date};
      for (const auto& [node, ts] : trip.station_times) {
        const auto ri = static_cast<std::size_t>(std::find(sc.route_nodes.begin(), sc.route_nodes.end(), node) -
                                                 sc.route_nodes.begin());
        CourseEvent ev;
        ev.line = key.line;
        ev.subline = key.subline;
        ev.chain = key.chain;
        ev.range = key.range;
        ev.direction = key.direction;
        ev.parc = day.parc;
        ev.date = day.date;
        ev.station_name = fmt::format("S{:02}", ri);
        ev.timestamp = ts;
        sc.events.push_back(std::move(ev));
      }
      TrajectoryTruth tt;
      tt.key = key;
      tt.first_event = trip.station_times.front().second;
      tt.last_event = trip.station_times.back().second;
      tt.std_s = trip.std_s;
      tt.pd_s = trip.pd_s;
      sc.truth.trajectories.push_back(tt);
    }

    const std::size_t fix_base = sc.fixes.size();
    const double begin = day.legs.front().begin();
    const double finish = day.legs.back().end();
    std::uniform_int_distribution<int> step(spec.sampling_min_s, spec.sampling_max_s);
    std::size_t leg_i = 0;
    for (int ts = static_cast<int>(begin) + step(rng) / 2; ts <= finish; ts += step(rng)) {
      while (leg_i + 1 < day.legs.size() && day.legs[leg_i].end() < ts) ++leg_i;
      const Leg& leg = day.legs[leg_i];
      if (!leg.path) continue;
      const double s = position_on(leg, ts);
      const auto [k, u] = leg.path->locate(s);
      const auto& pe = leg.path->edges[k];
      const auto& edge = net.edge(pe.id);
      FixTruth ft;
      ft.edge = pe.id;
      ft.offset_m = std::clamp(pe.forward ? u : edge.length_m - u, 0.0, edge.length_m);
      ft.at_node = u < 1e-6 || u > pe.length_m - 1e-6;
      LatLon p = net.position_at(pe.id, ft.offset_m);
      bool displaced = false;
      if (spec.outlier_fraction > 0.0 && uniform(0.0, 1.0) < spec.outlier_fraction) {
        const double side = uniform(0.0, 1.0) < 0.5 ? 90.0 : -90.0;
        const double brg = (net.bearing_at(pe.id, ft.offset_m) + side) * std::numbers::pi / 180.0;
        for (double dist = uniform(150.0, 250.0); dist < 2000.0 && !displaced; dist *= 1.5) {
          const LatLon q = offset_by_meters(p, dist * std::sin(brg), dist * std::cos(brg));
          if (net.snap_candidates(q, 2.0 * 50.0, 1).empty()) {
            p = q;
            displaced = true;
          }
        }
      }
      if (!displaced && spec.noise_sd_m > 0.0) {
        p = offset_by_meters(p, spec.noise_sd_m * noise(rng), spec.noise_sd_m * noise(rng));
      }
      ft.outlier = displaced;
      for (std::size_t j = 0; j < day.trips.size(); ++j) {
        const auto& tt = sc.truth.trajectories[trip_base + j];
        if (ts >= tt.first_event - kClaimMarginS && ts <= tt.last_event + kClaimMarginS) {
          ft.trajectory = static_cast<int>(trip_base + j);
        }
      }
      GpsFix f;
      f.parc = day.parc;
      f.date = day.date;
      f.timestamp = ts;
      f.position = p;
      sc.fixes.push_back(std::move(f));
      sc.truth.fixes.push_back(ft);
    }

    // Transit windows and totals from the generated fixes.
    for (std::size_t j = 0; j < day.trips.size(); ++j) {
      auto& tt = sc.truth.trajectories[trip_base + j];
      int lo = -1, hi = -1;
      for (std::size_t f = fix_base; f < sc.truth.fixes.size(); ++f) {
        if (sc.truth.fixes[f].trajectory != static_cast<int>(trip_base + j)) continue;
        if (lo < 0) lo = sc.fixes[f].timestamp;
        hi = sc.fixes[f].timestamp;
      }
      if (lo < 0) continue;
      const double lead = std::max(0, tt.first_event - lo);
      const double trail = std::max(0, hi - tt.last_event);
      const bool lead_short = j > 0 && tt.first_event - sc.truth.trajectories[trip_base + j - 1].last_event <= kTransitGapS;
      const bool trail_short =
          j + 1 < day.trips.size() && sc.truth.trajectories[trip_base + j + 1].first_event - tt.last_event <= kTransitGapS;
      (lead_short ? tt.tps_s : tt.tpl_s) += lead;
      (trail_short ? tt.tps_s : tt.tpl_s) += trail;
      tt.total_s = hi - lo;
    }
  }

  std::vector<std::size_t> order(sc.fixes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = sc.fixes[a];
    const auto& y = sc.fixes[b];
    return std::tie(x.parc, x.date, x.timestamp) < std::tie(y.parc, y.date, y.timestamp);
  });
  std::vector<GpsFix> fixes;
  std::vector<FixTruth> truth;
  fixes.reserve(order.size());
  truth.reserve(order.size());
  for (std::size_t i : order) {
    fixes.push_back(std::move(sc.fixes[i]));
    truth.push_back(sc.truth.fixes[i]);
  }
  sc.fixes = std::move(fixes);
  sc.truth.fixes = std::move(truth);
  return sc;
}

std::string courses_csv(const Scenario& s) {
  std::string out = "line,subline,chain,range,direction,parc,date,station_name,timestamp\n";
  for (const auto& e : s.events) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv::escape(e.line), csv::escape(e.subline), csv::escape(e.chain),
                       csv::escape(e.range), e.direction == Direction::outbound ? 0 : 1, csv::escape(e.parc),
                       e.date.to_string(), csv::escape(e.station_name), format_time_of_day(e.timestamp));
  }
  return out;
}

std::string locations_csv(const Scenario& s) {
  std::string out = "parc,date,timestamp,lat,lon\n";
  for (const auto& f : s.fixes) {
    out += fmt::format("{},{},{},{:.8f},{:.8f}\n", csv::escape(f.parc), f.date.to_string(), format_time_of_day(f.timestamp),
                       f.position.lat, f.position.lon);
  }
  return out;
}

std::string ground_truth_json(const Scenario& s) {
  nlohmann::json injected = nlohmann::json::array();
  for (const auto& d : s.truth.injected) {
    injected.push_back({{"node", d.node},
                        {"delay_s", d.delay_s},
                        {"outbound_position_m", d.outbound_position_m},
                        {"inbound_position_m", d.inbound_position_m}});
  }
  nlohmann::json trajectories = nlohmann::json::array();
  for (const auto& t : s.truth.trajectories) {
    trajectories.push_back({{"key", t.key.to_string()},
                            {"route", t.key.route_label()},
                            {"first_event", format_time_of_day(t.first_event)},
                            {"last_event", format_time_of_day(t.last_event)},
                            {"std_s", t.std_s},
                            {"tps_s", t.tps_s},
                            {"tpl_s", t.tpl_s},
                            {"pd_s", t.pd_s},
                            {"total_s", t.total_s}});
  }
  // One row per fix in locations.csv order: [edge_id, offset_m, at_node, outlier, trajectory].
  nlohmann::json fixes = nlohmann::json::array();
  for (const auto& f : s.truth.fixes) {
    fixes.push_back({f.edge, std::round(f.offset_m * 1000.0) / 1000.0, f.at_node ? 1 : 0, f.outlier ? 1 : 0, f.trajectory});
  }
  nlohmann::json doc = {{"seed", s.spec.seed},
                        {"route_length_m", s.truth.route_length_m},
                        {"stations", s.station_nodes},
                        {"injected", injected},
                        {"trajectories", trajectories},
                        {"fix_columns", {"edge_id", "offset_m", "at_node", "outlier", "trajectory"}},
                        {"fixes", fixes}};
  return doc.dump(1) + "\n";
}

ScenarioFiles write_scenario(const Scenario& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::io, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  ScenarioFiles files{dir / "network.geojson", dir / "courses.csv", dir / "locations.csv", dir / "ground_truth.json"};
  write_text_file(files.network, network_to_geojson(s.network), kModule);
  write_text_file(files.courses, courses_csv(s), kModule);
  write_text_file(files.locations, locations_csv(s), kModule);
  write_text_file(files.ground_truth, ground_truth_json(s), kModule);
  return files;
}

std::vector<ClusterSample> null_cluster_samples(std::uint64_t seed, std::size_t count, std::size_t n_lo,
                                                std::size_t n_hi) {
  if (n_lo < 2 || n_hi < n_lo) fail(ErrorCategory::config, "invalid null cluster size range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(n_lo, n_hi);
  std::uniform_real_distribution<double> theo_d(5.0, 40.0);
  std::uniform_real_distribution<double> scale_d(0.5, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ClusterSample> out;
  for (std::size_t c = 0; c < count; ++c) {
    ClusterSample s;
    s.route_label = "null";
    s.index = c;
    s.lo_m = 100.0 * static_cast<double>(c);
    s.hi_m = s.lo_m + 100.0;
    const std::size_t n = size(rng);
    const double scale = scale_d(rng);
    const int shape = static_cast<int>(c % 3);
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      if (shape == 0) {
        e = std::normal_distribution<double>(0.0, scale)(rng);
      } else if (shape == 1) {
        // Laplace
        const double u = unit(rng) - 0.5;
        e = -scale * std::copysign(std::log(1.0 - 2.0 * std::fabs(u)), u);
      } else {
        e = scale * (2.0 * unit(rng) - 1.0);
      }
      const double theo = theo_d(rng);
      s.theo.push_back(theo);
      s.real.push_back(theo + e);
      s.profiles.push_back(i);
    }
    s.point_count = n;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dtqs::testkit
