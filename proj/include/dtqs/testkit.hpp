#ifndef DTQS_TESTKIT_HPP
#define DTQS_TESTKIT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtqs/gps.hpp"
#include "dtqs/ingestion.hpp"
#include "dtqs/road_network.hpp"
#include "dtqs/trajectory_metrics.hpp"

namespace dtqs::testkit {

/// Target percentages of point delay, stop dwell and everything else in the
/// total time of every trajectory.
struct ShareTargets {
  double point_pct = 23.5;
  double stop_pct = 65.0;
  double others_pct = 11.5;
};

struct ScenarioSpec {
  std::uint64_t seed = 1;

  // Corridor network, used unless `network` is given.
  std::size_t node_count = 41;
  double node_spacing_m = 100.0;
  double speed_limit_kmh = 50.0;
  double slow_speed_limit_kmh = 30.0;  // every seventh edge
  LatLon origin{48.8566, 2.3522};

  // Custom network: the outbound route as a node sequence.
  std::optional<RoadNetwork> network;
  std::vector<NodeId> route_nodes;

  double operator_speed_kmh = 50.0;
  std::size_t station_every = 4;     // route node index multiple
  double delay_node_fraction = 0.10;  // of all route nodes
  double delay_s = 20.0;
  double delay_jitter = 0.25;  // per-traversal delay uniform in delay_s * (1 +- jitter)
  std::vector<NodeId> delay_nodes;  // overrides the random choice when non-empty

  std::size_t trajectories = 60;
  std::size_t vehicles = 4;
  std::size_t trips_per_day = 6;
  bool both_directions = false;
  std::string line = "L1";
  std::string subline = "1";
  CalendarDate first_date{2016, 3, 1};

  double noise_sd_m = 3.0;
  double outlier_fraction = 0.0;  // fixes displaced beyond any snap radius
  int sampling_min_s = 9;
  int sampling_max_s = 20;
  double dwell_min_s = 40.0;
  double dwell_max_s = 60.0;
  double speed_jitter_sd = 0.03;  // per-trajectory speed factor around 1
  double short_gap_probability = 0.5;

  std::optional<ShareTargets> shares;
};

struct InjectedDelay {
  NodeId node = 0;
  double delay_s = 0.0;
  double outbound_position_m = 0.0;
  double inbound_position_m = 0.0;
};

struct TrajectoryTruth {
  RouteKey key;
  int first_event = 0;
  int last_event = 0;
  double std_s = 0.0;
  double tps_s = 0.0;
  double tpl_s = 0.0;
  double pd_s = 0.0;
  double total_s = 0.0;  // first to last fix inside the claim window
};

struct FixTruth {
  EdgeId edge = 0;
  double offset_m = 0.0;
  bool at_node = false;  // generating position coincides with a node
  bool outlier = false;
  int trajectory = -1;  // index into trajectories, -1 outside every claim window
};

struct GroundTruth {
  std::vector<InjectedDelay> injected;
  std::vector<TrajectoryTruth> trajectories;
  std::vector<FixTruth> fixes;  // parallel to Scenario::fixes
  double route_length_m = 0.0;
};

struct Scenario {
  ScenarioSpec spec;
  RoadNetwork network;
  std::vector<NodeId> route_nodes;   // outbound
  std::vector<NodeId> station_nodes;
  std::vector<CourseEvent> events;
  std::vector<GpsFix> fixes;  // sorted by (parc, date, timestamp)
  GroundTruth truth;
};

/// Deterministic for a given spec. Throws config errors on invalid specs and
/// validation errors on a route the network cannot carry.
Scenario generate_scenario(const ScenarioSpec& spec);

std::string courses_csv(const Scenario& s);
std::string locations_csv(const Scenario& s);
std::string ground_truth_json(const Scenario& s);

struct ScenarioFiles {
  std::filesystem::path network, courses, locations, ground_truth;
};

/// network.geojson, courses.csv, locations.csv, ground_truth.json under dir.
ScenarioFiles write_scenario(const Scenario& s, const std::filesystem::path& dir);

/// Paired (theoretical, real) cluster samples with no systematic difference.
/// Noise shape and size vary per cluster.
std::vector<ClusterSample> null_cluster_samples(std::uint64_t seed, std::size_t count, std::size_t n_lo = 8,
                                                std::size_t n_hi = 60);

}  // namespace dtqs::testkit

#endif  // DTQS_TESTKIT_HPP
