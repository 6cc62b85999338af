#include "dtqs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "dtqs/csv.hpp"
#include "dtqs/error.hpp"
#include "dtqs/io.hpp"

namespace dtqs {
namespace {

const std::string kModule = "pipeline";

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after every thread has joined.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  const std::size_t threads = std::min(n, workers);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

class Stopwatch {
 public:
  explicit Stopwatch(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    sink_.emplace_back(stage, std::chrono::duration<double, std::milli>(now - last_).count());
    last_ = now;
  }

 private:
  std::vector<std::pair<std::string, double>>& sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void cluster_route(RouteResult& route, const std::vector<PooledPoint>& pool, const AnalysisResult& result,
                   const AnalysisOptions& options) {
  route.pooled_points = pool.size();
  std::vector<double> pos;
  pos.reserve(pool.size());
  for (const auto& pp : pool) pos.push_back(pp.position_m);
  const std::size_t distinct = distinct_count(pos);
  if (distinct == 0) return;
  route.k_range.hi = std::min(options.k_range.hi, distinct);
  route.k_range.lo = std::min(options.k_range.lo, route.k_range.hi);
  if (route.k_range.hi < options.k_range.hi) {
    spdlog::info("{}: k range clipped to {}..{} by {} distinct positions", route.route_label, route.k_range.lo,
                 route.k_range.hi, distinct);
  }
  route.selection = select_k(pos, route.k_range, options.k_selector, options.seed ^ fnv1a(route.route_label));
  const auto& model = route.selection.model;
  route.contiguity = verify_cluster_contiguity(model, pos);
  if (!route.contiguity.pass) {
    spdlog::warn("{}: {} pooled points break cluster contiguity", route.route_label, route.contiguity.offending.size());
  }
  route.samples = point_delay_samples(result.profiles, result.theo, route.route_label, pool, model.assignments, model.k);
  route.tests = run_cluster_tests(route.samples, options.tests);

  route.representative.assign(model.k, LatLon{});
  std::vector<double> best(model.k, kInfinity);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::size_t c = model.assignments[i];
    const double d = std::fabs(pos[i] - model.centroids[c]);
    if (d < best[c]) {
      best[c] = d;
      route.representative[c] = result.profiles[pool[i].profile].points[pool[i].point].snapped;
    }
  }
}

}  // namespace

void validate(const AnalysisOptions& o) {
  auto bad = [](const std::string& m) { throw Error(kModule, ErrorCategory::config, m); };
  if (!(o.spc_kmh > 0.0)) bad(fmt::format("operator speed must be positive, got {}", o.spc_kmh));
  if (!(o.snap_threshold_m > 0.0)) bad(fmt::format("snap threshold must be positive, got {}", o.snap_threshold_m));
  if (o.k_range.lo < 1 || o.k_range.lo > o.k_range.hi) {
    bad(fmt::format("invalid k range {}..{}", o.k_range.lo, o.k_range.hi));
  }
  if (!(o.tests.alpha > 0.0 && o.tests.alpha < 1.0)) bad(fmt::format("alpha must be in (0, 1), got {}", o.tests.alpha));
  if (!(o.tests.q > 0.0 && o.tests.q < 1.0)) bad(fmt::format("q must be in (0, 1), got {}", o.tests.q));
  if (o.histogram_bins == 0) bad("histogram needs at least one bin");
}

AnalysisResult analyze(const RoadNetwork& net, const std::vector<CourseEvent>& events,
                       const std::vector<GpsFix>& fixes, const AnalysisOptions& options) {
  validate(options);
  AnalysisResult result;
  Stopwatch clock(result.timings_ms);
  const std::size_t workers = worker_count(options.workers);

  JoinResult join = join_datasets(events, fixes);
  result.orphans = std::move(join.orphans);
  for (const auto& o : result.orphans) {
    spdlog::warn("orphan trajectory {}: {}", o.key.to_string(), o.reason);
  }
  clock.lap("join");

  const Router router(net, options.spc_kmh);
  MatchOptions match;
  match.snap_threshold_m = options.snap_threshold_m;
  const std::size_t n_traces = join.traces.size();
  result.trajectories.resize(n_traces);
  std::vector<std::optional<TrajectoryProfile>> built(n_traces);
  parallel_for(n_traces, workers, [&](std::size_t i) {
    const Trace& trace = join.traces[i];
    TrajectoryResult& tr = result.trajectories[i];
    tr.key = trace.key;
    tr.claimed_fixes = trace.fixes.size();
    MatchOutcome m = match_trace(trace, router, match);
    tr.status = m.status;
    tr.message = m.message;
    tr.shredded = m.trace.shredded_count;
    if (m.status != MatchStatus::ok) return;
    TrajectoryProfile p = compute_profile(m.trace);
    detect_stop_dwell(p, trace.station_events);
    p.previous_end = trace.previous_end;
    p.next_start = trace.next_start;
    tr.kept_points = p.points.size();
    built[i] = std::move(p);
  });
  for (const auto& tr : result.trajectories) {
    if (tr.status != MatchStatus::ok) {
      spdlog::warn("trajectory {} not analyzed ({}): {}", tr.key.to_string(), to_string(tr.status), tr.message);
    }
  }
  clock.lap("match");

  // Profiles grouped by vehicle-day so transit classification sees siblings.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n_traces; ++i) {
    if (built[i]) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = *built[a];
    const auto& y = *built[b];
    return std::tie(x.key.parc, x.key.date, x.station_events.front().timestamp) <
           std::tie(y.key.parc, y.key.date, y.station_events.front().timestamp);
  });
  for (std::size_t i : order) {
    result.trajectories[i].profile = result.profiles.size();
    result.profiles.push_back(std::move(*built[i]));
  }
  built.clear();
  for (std::size_t lo = 0; lo < result.profiles.size();) {
    std::size_t hi = lo + 1;
    while (hi < result.profiles.size() && result.profiles[hi].key.parc == result.profiles[lo].key.parc &&
           result.profiles[hi].key.date == result.profiles[lo].key.date) {
      ++hi;
    }
    classify_transit_periods(std::span(result.profiles).subspan(lo, hi - lo));
    lo = hi;
  }

  result.theo.resize(result.profiles.size());
  result.breakdowns.resize(result.profiles.size());
  parallel_for(result.profiles.size(), workers, [&](std::size_t i) {
    result.theo[i] = theoretical_step_times(result.profiles[i], router);
    result.breakdowns[i] = decompose_delay(result.profiles[i], result.theo[i]);
  });
  clock.lap("metrics");

  auto pools = pool_route_points(result.profiles);
  for (const auto& [label, pool] : pools) {
    RouteResult r;
    r.route_label = label;
    result.routes.push_back(std::move(r));
  }
  for (const auto& p : result.profiles) {
    for (auto& r : result.routes) {
      if (r.route_label == p.key.route_label()) ++r.trajectories;
    }
  }
  parallel_for(result.routes.size(), workers, [&](std::size_t i) {
    cluster_route(result.routes[i], pools.at(result.routes[i].route_label), result, options);
  });
  clock.lap("cluster_and_test");

  std::vector<double> pvals;
  for (const auto& r : result.routes) {
    for (const auto& s : r.tests.skipped) spdlog::debug("cluster {} skipped: {}", s.cluster_id, s.reason);
    std::map<std::string, std::size_t> index_of;
    for (std::size_t c = 0; c < r.samples.size(); ++c) index_of[r.samples[c].id()] = c;
    for (const auto& t : r.tests.tests) {
      const auto& s = r.samples[index_of.at(t.result.cluster_id)];
      ClassifiedPoint cp;
      cp.cluster_id = t.result.cluster_id;
      cp.route_label = r.route_label;
      cp.lat = r.representative[s.index].lat;
      cp.lon = r.representative[s.index].lon;
      cp.lo_m = s.lo_m;
      cp.hi_m = s.hi_m;
      cp.n = t.result.n;
      cp.test_used = t.result.test_used;
      cp.p_raw = t.result.p_value;
      cp.p_adjusted = t.p_adjusted;
      cp.cls = t.cls;
      cp.mean_real_s = t.mean_real_s;
      cp.mean_theo_s = t.mean_theo_s;
      result.points.push_back(std::move(cp));
      pvals.push_back(t.result.p_value);
    }
  }
  result.histogram = pvalue_histogram(pvals, options.histogram_bins);

  std::vector<BusTrajectory> buses;
  for (std::size_t i = 0; i < result.profiles.size(); ++i) {
    buses.push_back({result.profiles[i].key.parc, result.profiles[i].points.size(), result.breakdowns[i]});
  }
  result.shares = delay_share_table(buses);

  auto& fc = result.fixes;
  fc.total = fixes.size();
  fc.unassigned = join.unassigned_fixes;
  for (const auto& tr : result.trajectories) {
    fc.shredded += tr.shredded;
    if (tr.status == MatchStatus::ok) {
      fc.assigned += tr.kept_points;
    } else {
      fc.unassigned += tr.claimed_fixes - tr.shredded;
    }
  }
  if (fc.assigned + fc.unassigned + fc.shredded != fc.total) {
    throw Error(kModule, ErrorCategory::contract,
                fmt::format("fix counts do not reconcile: {} assigned + {} unassigned + {} shredded != {}", fc.assigned,
                            fc.unassigned, fc.shredded, fc.total));
  }
  clock.lap("report");
  return result;
}

std::vector<ClusterTest> all_tests(const AnalysisResult& result) {
  std::vector<ClusterTest> out;
  for (const auto& r : result.routes) out.insert(out.end(), r.tests.tests.begin(), r.tests.tests.end());
  return out;
}

std::string clusters_csv(const AnalysisResult& result) {
  std::string out = "route_key,cluster_id,d_c_start,d_c_end,n_points,centroid_m,traversals,lat,lon,tested\n";
  for (const auto& r : result.routes) {
    for (const auto& s : r.samples) {
      const bool tested = std::any_of(r.tests.tests.begin(), r.tests.tests.end(),
                                      [&](const ClusterTest& t) { return t.result.cluster_id == s.id(); });
      out += fmt::format("{},{},{:.3f},{:.3f},{},{:.3f},{},{:.7f},{:.7f},{}\n", csv::escape(r.route_label),
                         csv::escape(s.id()), s.lo_m, s.hi_m, s.point_count, r.selection.model.centroids[s.index],
                         s.real.size(), r.representative[s.index].lat, r.representative[s.index].lon,
                         tested ? "yes" : "no");
    }
  }
  return out;
}

std::string trajectories_csv(const AnalysisResult& result) {
  std::string out =
      "trajectory,route,status,claimed_fixes,kept_points,shredded,std_s,tps_s,tpl_s,pd_s,slack_s,total_s,"
      "excluded_steps\n";
  for (const auto& tr : result.trajectories) {
    out += fmt::format("{},{},{},{},{},{}", csv::escape(tr.key.to_string()), csv::escape(tr.key.route_label()),
                       to_string(tr.status), tr.claimed_fixes, tr.kept_points, tr.shredded);
    if (tr.profile) {
      const auto& b = result.breakdowns[*tr.profile];
      out += fmt::format(",{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{}\n", b.stop_dwell_s, b.transit_short_s,
                         b.transit_long_s, b.point_delay_s, b.slack_s, b.total_s, b.excluded_steps);
    } else {
      out += ",,,,,,,\n";
    }
  }
  return out;
}

std::string rejections_csv(const std::vector<Rejection>& courses, const std::vector<Rejection>& locations) {
  std::string out = "file,line_number,reason\n";
  for (const auto* list : {&courses, &locations}) {
    for (const auto& r : *list) {
      out += fmt::format("{},{},{}\n", csv::escape(r.file), r.line_number, csv::escape(r.reason));
    }
  }
  return out;
}

namespace {

nlohmann::json manifest(const RunConfig& config, const RunSummary& s) {
  const auto& o = config.analysis;
  const auto& r = s.result;
  std::map<std::string, std::size_t> status;
  for (const auto& t : r.trajectories) ++status[std::string(to_string(t.status))];
  std::size_t clusters = 0, tested = 0, skipped = 0;
  std::map<std::string, std::size_t> classes;
  for (const auto& route : r.routes) {
    clusters += route.samples.size();
    tested += route.tests.tests.size();
    skipped += route.tests.skipped.size();
  }
  for (const auto& p : r.points) ++classes[std::string(to_string(p.cls))];
  nlohmann::json routes = nlohmann::json::array();
  for (const auto& route : r.routes) {
    routes.push_back({{"route", route.route_label},
                      {"trajectories", route.trajectories},
                      {"pooled_points", route.pooled_points},
                      {"k", route.selection.model.k},
                      {"k_range", fmt::format("{}..{}", route.k_range.lo, route.k_range.hi)},
                      {"contiguous", route.contiguity.pass}});
  }
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [stage, ms] : r.timings_ms) timings[stage] = std::round(ms * 1000.0) / 1000.0;
  return {
      {"config",
       {{"network", config.network.string()},
        {"courses", config.courses.string()},
        {"locations", config.locations.string()},
        {"out", config.out.string()},
        {"spc_kmh", o.spc_kmh},
        {"snap_threshold_m", o.snap_threshold_m},
        {"k_range", fmt::format("{}..{}", o.k_range.lo, o.k_range.hi)},
        {"k_selector", to_string(o.k_selector)},
        {"correction", to_string(o.tests.correction)},
        {"bins", to_string(o.tests.bins)},
        {"alpha", o.tests.alpha},
        {"q", o.tests.q},
        {"seed", o.seed},
        {"workers", worker_count(o.workers)}}},
      {"counts",
       {{"courses", {{"parsed", s.course_rows}, {"kept", s.course_rows - s.course_rejected}, {"rejected", s.course_rejected}}},
        {"locations",
         {{"parsed", s.location_rows}, {"kept", s.location_rows - s.location_rejected}, {"rejected", s.location_rejected}}},
        {"fixes",
         {{"total", r.fixes.total},
          {"assigned", r.fixes.assigned},
          {"unassigned", r.fixes.unassigned},
          {"shredded", r.fixes.shredded}}},
        {"trajectories", {{"total", r.trajectories.size()}, {"orphans", r.orphans.size()}, {"status", status}}},
        {"clusters", {{"total", clusters}, {"tested", tested}, {"skipped", skipped}, {"classes", classes}}}}},
      {"routes", routes},
      {"timings_ms", timings}};
}

}  // namespace

RunSummary run_pipeline(const RunConfig& config) {
  validate(config.analysis);
  if (config.out.empty()) throw Error(kModule, ErrorCategory::config, "output directory is required");
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary summary;
  const RoadNetwork net = load_network(config.network);
  auto courses = parse_courses(config.courses);
  auto locations = parse_locations(config.locations);
  summary.course_rows = courses.records.size() + courses.rejections.size();
  summary.course_rejected = courses.rejections.size();
  summary.location_rows = locations.records.size() + locations.rejections.size();
  summary.location_rejected = locations.rejections.size();
  if (!courses.rejections.empty() || !locations.rejections.empty()) {
    spdlog::warn("rejected {} course row(s) and {} location row(s)", courses.rejections.size(),
                 locations.rejections.size());
  }
  const double load_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  summary.result = analyze(net, courses.records, locations.records, config.analysis);
  summary.result.timings_ms.insert(summary.result.timings_ms.begin(), {"load", load_ms});

  std::error_code ec;
  const bool existed = std::filesystem::exists(config.out, ec);
  std::filesystem::create_directories(config.out, ec);
  if (ec) throw Error(kModule, ErrorCategory::io, fmt::format("cannot create {}: {}", config.out.string(), ec.message()));
  auto emit = [&](const std::string& name, const std::string& content) {
    const auto path = config.out / name;
    write_text_file(path, content, kModule);
    summary.outputs.push_back(path);
  };
  try {
    const auto& r = summary.result;
    const auto tests = all_tests(r);
    emit("points.geojson", classified_points_geojson(r.points));
    emit("stats.csv", stats_csv(tests));
    emit("summary.csv", summary_csv(r.shares));
    emit("pvalues_hist.csv", pvalue_histogram_csv(r.histogram));
    emit("clusters.csv", clusters_csv(r));
    emit("trajectories.csv", trajectories_csv(r));
    emit("rejections.csv", rejections_csv(courses.rejections, locations.rejections));
    emit("map.html", map_html(r.points));
    emit("run_manifest.json", manifest(config, summary).dump(2) + "\n");
  } catch (...) {
    for (const auto& p : summary.outputs) std::filesystem::remove(p, ec);
    if (!existed) std::filesystem::remove(config.out, ec);
    throw;
  }
  return summary;
}

}  // namespace dtqs
