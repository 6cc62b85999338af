#ifndef DTQS_ROAD_NETWORK_HPP
#define DTQS_ROAD_NETWORK_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dtqs/geo.hpp"
#include "dtqs/gps.hpp"

namespace dtqs {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Node {
  NodeId id = 0;
  LatLon position;
};

struct Edge {
  EdgeId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length_m = 0.0;
  double speed_limit_kmh = 0.0;  // road authority limit
  bool oneway = false;
  std::vector<LatLon> geometry;  // polyline, from-node first and to-node last
};

/// A fix projected onto the closest point of one edge.
struct SnappedPoint {
  GpsFix source_fix;
  EdgeId edge_id = 0;
  double offset_m = 0.0;  // along the edge from its from-node
  LatLon snapped;
  double snap_distance_m = 0.0;
};

/// Travel sense along an edge relative to its digitized from->to direction.
enum class Travel : std::uint8_t { forward, backward };

/// A position on the network together with the direction the vehicle moves.
struct NetworkLocation {
  EdgeId edge = 0;
  double offset_m = 0.0;
  Travel travel = Travel::forward;

  friend bool operator==(const NetworkLocation&, const NetworkLocation&) = default;
};

/// Immutable directed road graph. Edges that are not one-way may be
/// travelled in both senses.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  RoadNetwork(std::vector<Node> nodes, std::vector<Edge> edges);

  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  bool empty() const noexcept { return edges_.empty(); }

  bool has_node(NodeId id) const { return node_index_.contains(id); }
  bool has_edge(EdgeId id) const { return edge_index_.contains(id); }
  std::size_t node_index(NodeId id) const;
  std::size_t edge_index(EdgeId id) const;
  const Node& node(NodeId id) const { return nodes_[node_index(id)]; }
  const Edge& edge(EdgeId id) const { return edges_[edge_index(id)]; }

  LatLon position_at(EdgeId edge, double offset_m) const;
  /// Bearing of the digitized edge direction at the given offset.
  double bearing_at(EdgeId edge, double offset_m) const;

  /// Best projection per edge within radius_m of p, nearest first; ties go to
  /// the lowest edge id, then the lowest offset.
  std::vector<SnappedPoint> snap_candidates(const GpsFix& fix, double radius_m,
                                            std::size_t max_count = std::numeric_limits<std::size_t>::max()) const;

  std::vector<SnappedPoint> snap_candidates(LatLon p, double radius_m,
                                            std::size_t max_count = std::numeric_limits<std::size_t>::max()) const;

  double max_speed_limit_kmh() const noexcept { return max_speed_limit_kmh_; }
  const LocalFrame& frame() const noexcept { return frame_; }

 private:
  struct SegmentRef {
    std::uint32_t edge;
    std::uint32_t segment;
  };

  void build_index();
  std::vector<SnappedPoint> scan(LatLon p, double radius_m) const;
  std::int64_t cell_key(std::int64_t cx, std::int64_t cy) const noexcept;

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<EdgeId, std::size_t> edge_index_;
  std::vector<std::vector<double>> vertex_offsets_;        // per edge, cumulative meters
  std::vector<std::vector<PlanarPoint>> planar_geometry_;  // per edge
  LocalFrame frame_;
  double cell_size_m_ = 200.0;
  std::unordered_map<std::int64_t, std::vector<SegmentRef>> grid_;
  double max_speed_limit_kmh_ = 0.0;
  double extent_m_ = 0.0;
};

/// Parses a network GeoJSON FeatureCollection. LineString features carry
/// edge_id, from_node, to_node, speed_limit_kmh and oneway; an optional
/// length_m overrides the geometric length. Optional Point features with a
/// node_id property declare nodes explicitly. `source` is used in messages.
RoadNetwork parse_network_geojson(std::string_view text, const std::string& source = "<memory>");
RoadNetwork load_network(const std::filesystem::path& path);
std::string network_to_geojson(const RoadNetwork& net);

/// Closest network point over all edges.
SnappedPoint nearest_network_point(const GpsFix& fix, const RoadNetwork& net);

/// Operator-capped speed: min(sp_g, sp_c), both km/h and positive.
double effective_speed(double sp_g_kmh, double sp_c_kmh);

enum class RouteMetric { distance, time };

/// Direction-aware shortest paths over the directed road graph. Time weights
/// use effective_speed(edge limit, operator limit).
class Router {
 public:
  Router(const RoadNetwork& net, double operator_speed_kmh);

  class Search {
   public:
    /// Cheapest cost to reach `to` arriving with its travel sense; infinity
    /// when not reachable within the search bound.
    double cost_to(const NetworkLocation& to) const;

   private:
    friend class Router;
    const Router* router_ = nullptr;
    NetworkLocation from_;
    RouteMetric metric_ = RouteMetric::distance;
    double bound_ = kInfinity;
    bool allow_reversal_ = true;
    std::vector<std::pair<std::size_t, double>> settled_;  // node index -> cost, sorted
  };

  /// Without reversal no path turns around onto the start edge against its
  /// starting travel sense.
  Search search(const NetworkLocation& from, RouteMetric metric, double bound = kInfinity,
                bool allow_reversal = true) const;
  double cost(const NetworkLocation& from, const NetworkLocation& to, RouteMetric metric, double bound = kInfinity,
              bool allow_reversal = true) const;

  /// Per-meter weight of an edge under the metric.
  double weight_per_meter(std::size_t edge_index, RouteMetric metric) const;
  bool allows(const NetworkLocation& loc) const;
  const RoadNetwork& network() const noexcept { return *net_; }
  double operator_speed_kmh() const noexcept { return operator_speed_kmh_; }

 private:
  struct Arc {
    std::size_t edge;
    std::size_t head;
    double length_m;
    double time_s;
  };

  const RoadNetwork* net_;
  double operator_speed_kmh_;
  std::vector<std::vector<Arc>> out_arcs_;
  std::vector<double> seconds_per_meter_;
};

/// Minimum time over directed paths between two snapped points, leaving and
/// arriving in any permitted sense. Throws dtqs::Error (unreachable).
double theoretical_travel_time(const RoadNetwork& net, const SnappedPoint& from, const SnappedPoint& to,
                               double sp_c_kmh);
double theoretical_travel_time(const Router& router, const SnappedPoint& from, const SnappedPoint& to);

}  // namespace dtqs

#endif  // DTQS_ROAD_NETWORK_HPP
