#ifndef DTQS_PIPELINE_HPP
#define DTQS_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtqs/clustering.hpp"
#include "dtqs/ingestion.hpp"
#include "dtqs/map_matching.hpp"
#include "dtqs/reporting.hpp"
#include "dtqs/road_network.hpp"
#include "dtqs/significance.hpp"
#include "dtqs/trajectory_metrics.hpp"

namespace dtqs {

struct AnalysisOptions {
  double spc_kmh = 50.0;
  double snap_threshold_m = kDefaultSnapThresholdM;
  KRange k_range{2, 40};
  KSelector k_selector = KSelector::bic;
  TestOptions tests;
  std::uint64_t seed = 1;
  std::size_t workers = 0;  // 0: available cores
  std::size_t histogram_bins = 20;
};

/// Throws config errors for out-of-range settings.
void validate(const AnalysisOptions& options);

struct TrajectoryResult {
  RouteKey key;
  MatchStatus status = MatchStatus::ok;
  std::string message;
  std::size_t claimed_fixes = 0;
  std::size_t kept_points = 0;
  std::size_t shredded = 0;
  std::optional<std::size_t> profile;  // index into AnalysisResult::profiles
};

struct RouteResult {
  std::string route_label;
  std::size_t trajectories = 0;
  std::size_t pooled_points = 0;
  KRange k_range;  // as fitted, after clipping to the distinct positions
  Selection selection;
  ContiguityReport contiguity;
  std::vector<ClusterSample> samples;
  ClusterTests tests;
  std::vector<LatLon> representative;  // per cluster, pooled point nearest the centroid
};

struct FixCounts {
  std::size_t total = 0;
  std::size_t assigned = 0;    // kept points of analyzed trajectories
  std::size_t unassigned = 0;  // claimed by no trajectory, or by one that failed to match
  std::size_t shredded = 0;
};

struct AnalysisResult {
  std::vector<OrphanReport> orphans;
  std::vector<TrajectoryResult> trajectories;  // join order
  std::vector<TrajectoryProfile> profiles;     // ordered by vehicle-day, then first event
  std::vector<std::vector<double>> theo;
  std::vector<DelayBreakdown> breakdowns;
  std::vector<RouteResult> routes;  // by route label
  std::vector<ClassifiedPoint> points;
  DelayShareTable shares;
  std::vector<std::size_t> histogram;
  FixCounts fixes;
  std::vector<std::pair<std::string, double>> timings_ms;
};

/// Join, match, decompose, cluster per route and test. Deterministic for a
/// given seed regardless of the worker count.
AnalysisResult analyze(const RoadNetwork& net, const std::vector<CourseEvent>& events,
                       const std::vector<GpsFix>& fixes, const AnalysisOptions& options);

/// Tests of every route in route order.
std::vector<ClusterTest> all_tests(const AnalysisResult& result);

/// route_key, cluster_id, d_c_start, d_c_end, n_points, centroid_m, traversals, lat, lon, tested
std::string clusters_csv(const AnalysisResult& result);

/// One row per trajectory: status, counts and the delay breakdown.
std::string trajectories_csv(const AnalysisResult& result);

/// file, line_number, reason
std::string rejections_csv(const std::vector<Rejection>& courses, const std::vector<Rejection>& locations);

struct RunConfig {
  std::filesystem::path network;
  std::filesystem::path courses;
  std::filesystem::path locations;
  std::filesystem::path out;
  AnalysisOptions analysis;
};

struct RunSummary {
  AnalysisResult result;
  std::size_t course_rows = 0, course_rejected = 0;
  std::size_t location_rows = 0, location_rejected = 0;
  std::vector<std::filesystem::path> outputs;
};

/// Loads the inputs, analyzes and writes every output file under config.out.
/// Files written before a failure are removed again.
RunSummary run_pipeline(const RunConfig& config);

}  // namespace dtqs

#endif  // DTQS_PIPELINE_HPP
