#include "dtqs/road_network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "dtqs/error.hpp"

namespace dtqs {
namespace {

constexpr const char* kModule = "road_network";

// Distances are compared on a micrometre grid so that numerically equal
// projections onto different edges fall through to the id tie-break.
std::int64_t distance_key(double meters) { return std::llround(meters * 1e6); }

bool snap_less(const SnappedPoint& a, const SnappedPoint& b) {
  const auto ka = distance_key(a.snap_distance_m);
  const auto kb = distance_key(b.snap_distance_m);
  if (ka != kb) return ka < kb;
  if (a.edge_id != b.edge_id) return a.edge_id < b.edge_id;
  return a.offset_m < b.offset_m;
}

[[noreturn]] void fail(ErrorCategory category, const std::string& message) {
  throw Error(kModule, category, message);
}

}  // namespace

// ---------------------------------------------------------------------------
// RoadNetwork

RoadNetwork::RoadNetwork(std::vector<Node> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  if (nodes_.empty()) fail(ErrorCategory::validation, "network has no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (!is_valid(n.position)) fail(ErrorCategory::validation, fmt::format("node {} has invalid coordinates", n.id));
    if (!node_index_.emplace(n.id, i).second) fail(ErrorCategory::validation, fmt::format("duplicate node id {}", n.id));
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    Edge& e = edges_[i];
    if (!edge_index_.emplace(e.id, i).second) fail(ErrorCategory::validation, fmt::format("duplicate edge id {}", e.id));
    if (!has_node(e.from) || !has_node(e.to)) {
      fail(ErrorCategory::validation,
           fmt::format("edge {} references missing node {}", e.id, has_node(e.from) ? e.to : e.from));
    }
    if (!(e.speed_limit_kmh > 0.0) || !std::isfinite(e.speed_limit_kmh)) {
      fail(ErrorCategory::validation, fmt::format("edge {} has non-positive speed limit", e.id));
    }
    if (e.geometry.empty()) e.geometry = {node(e.from).position, node(e.to).position};
    if (e.geometry.size() < 2) fail(ErrorCategory::validation, fmt::format("edge {} geometry needs 2 positions", e.id));
    for (const auto& p : e.geometry) {
      if (!is_valid(p)) fail(ErrorCategory::validation, fmt::format("edge {} has invalid coordinates", e.id));
    }
    max_speed_limit_kmh_ = std::max(max_speed_limit_kmh_, e.speed_limit_kmh);
  }

  double min_lat = 90, max_lat = -90, min_lon = 180, max_lon = -180;
  for (const auto& n : nodes_) {
    min_lat = std::min(min_lat, n.position.lat);
    max_lat = std::max(max_lat, n.position.lat);
    min_lon = std::min(min_lon, n.position.lon);
    max_lon = std::max(max_lon, n.position.lon);
  }
  frame_ = LocalFrame({(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0});
  extent_m_ = haversine({min_lat, min_lon}, {max_lat, max_lon});

  vertex_offsets_.resize(edges_.size());
  planar_geometry_.resize(edges_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    Edge& e = edges_[i];
    auto& offsets = vertex_offsets_[i];
    offsets.assign(e.geometry.size(), 0.0);
    for (std::size_t v = 1; v < e.geometry.size(); ++v) {
      offsets[v] = offsets[v - 1] + haversine(e.geometry[v - 1], e.geometry[v]);
    }
    const double geometric = offsets.back();
    if (e.length_m > 0.0) {
      if (geometric > 0.0) {
        const double scale = e.length_m / geometric;
        for (auto& o : offsets) o *= scale;
        offsets.back() = e.length_m;
      } else {
        fail(ErrorCategory::validation, fmt::format("edge {} has zero-length geometry", e.id));
      }
    } else {
      e.length_m = geometric;
    }
    if (!(e.length_m > 0.0)) fail(ErrorCategory::validation, fmt::format("edge {} has non-positive length", e.id));
    auto& planar = planar_geometry_[i];
    planar.reserve(e.geometry.size());
    for (const auto& p : e.geometry) planar.push_back(frame_.to_planar(p));
  }
  build_index();
}

std::size_t RoadNetwork::node_index(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) fail(ErrorCategory::input, fmt::format("unknown node id {}", id));
  return it->second;
}

std::size_t RoadNetwork::edge_index(EdgeId id) const {
  auto it = edge_index_.find(id);
  if (it == edge_index_.end()) fail(ErrorCategory::input, fmt::format("unknown edge id {}", id));
  return it->second;
}

std::int64_t RoadNetwork::cell_key(std::int64_t cx, std::int64_t cy) const noexcept {
  return (cx << 32) ^ (cy & 0xffffffffLL);
}

void RoadNetwork::build_index() {
  for (std::size_t e = 0; e < planar_geometry_.size(); ++e) {
    const auto& g = planar_geometry_[e];
    for (std::size_t s = 0; s + 1 < g.size(); ++s) {
      const auto x0 = static_cast<std::int64_t>(std::floor(std::min(g[s].x, g[s + 1].x) / cell_size_m_));
      const auto x1 = static_cast<std::int64_t>(std::floor(std::max(g[s].x, g[s + 1].x) / cell_size_m_));
      const auto y0 = static_cast<std::int64_t>(std::floor(std::min(g[s].y, g[s + 1].y) / cell_size_m_));
      const auto y1 = static_cast<std::int64_t>(std::floor(std::max(g[s].y, g[s + 1].y) / cell_size_m_));
      for (auto cx = x0; cx <= x1; ++cx) {
        for (auto cy = y0; cy <= y1; ++cy) {
          grid_[cell_key(cx, cy)].push_back({static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(s)});
        }
      }
    }
  }
}

LatLon RoadNetwork::position_at(EdgeId edge_id, double offset_m) const {
  const std::size_t e = edge_index(edge_id);
  const auto& offsets = vertex_offsets_[e];
  const auto& geom = edges_[e].geometry;
  const double off = std::clamp(offset_m, 0.0, offsets.back());
  auto it = std::upper_bound(offsets.begin(), offsets.end(), off);
  std::size_t s = it == offsets.begin() ? 0 : static_cast<std::size_t>(it - offsets.begin()) - 1;
  if (s + 1 >= offsets.size()) return geom.back();
  const double span = offsets[s + 1] - offsets[s];
  const double t = span > 0.0 ? (off - offsets[s]) / span : 0.0;
  if (t <= 0.0) return geom[s];
  const auto& a = planar_geometry_[e][s];
  const auto& b = planar_geometry_[e][s + 1];
  return frame_.to_latlon({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
}

double RoadNetwork::bearing_at(EdgeId edge_id, double offset_m) const {
  const std::size_t e = edge_index(edge_id);
  const auto& offsets = vertex_offsets_[e];
  const auto& geom = edges_[e].geometry;
  auto it = std::upper_bound(offsets.begin(), offsets.end(), std::clamp(offset_m, 0.0, offsets.back()));
  std::size_t s = it == offsets.begin() ? 0 : static_cast<std::size_t>(it - offsets.begin()) - 1;
  s = std::min(s, geom.size() - 2);
  // Skip degenerate zero-length segments.
  while (s + 2 < geom.size() && geom[s] == geom[s + 1]) ++s;
  return initial_bearing(geom[s], geom[s + 1]);
}

std::vector<SnappedPoint> RoadNetwork::scan(LatLon p, double radius_m) const {
  const PlanarPoint q = frame_.to_planar(p);
  const double pad = std::isfinite(radius_m) ? radius_m * 1.01 + 1.0 : kInfinity;

  std::vector<SegmentRef> refs;
  const bool brute = !std::isfinite(pad) || (2.0 * pad / cell_size_m_) * (2.0 * pad / cell_size_m_) > 4.0 * grid_.size();
  if (brute) {
    for (std::size_t e = 0; e < planar_geometry_.size(); ++e) {
      for (std::size_t s = 0; s + 1 < planar_geometry_[e].size(); ++s) {
        refs.push_back({static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(s)});
      }
    }
  } else {
    const auto x0 = static_cast<std::int64_t>(std::floor((q.x - pad) / cell_size_m_));
    const auto x1 = static_cast<std::int64_t>(std::floor((q.x + pad) / cell_size_m_));
    const auto y0 = static_cast<std::int64_t>(std::floor((q.y - pad) / cell_size_m_));
    const auto y1 = static_cast<std::int64_t>(std::floor((q.y + pad) / cell_size_m_));
    for (auto cx = x0; cx <= x1; ++cx) {
      for (auto cy = y0; cy <= y1; ++cy) {
        auto it = grid_.find(cell_key(cx, cy));
        if (it != grid_.end()) refs.insert(refs.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(refs.begin(), refs.end(), [](const SegmentRef& a, const SegmentRef& b) {
      return a.edge != b.edge ? a.edge < b.edge : a.segment < b.segment;
    });
    refs.erase(std::unique(refs.begin(), refs.end(),
                           [](const SegmentRef& a, const SegmentRef& b) {
                             return a.edge == b.edge && a.segment == b.segment;
                           }),
               refs.end());
  }

  std::vector<SnappedPoint> best;  // one per edge, refs are edge-sorted
  for (const auto& ref : refs) {
    const auto& g = planar_geometry_[ref.edge];
    const PlanarPoint& a = g[ref.segment];
    const PlanarPoint& b = g[ref.segment + 1];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((q.x - a.x) * dx + (q.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = a.x + t * dx;
    const double py = a.y + t * dy;
    if (std::hypot(q.x - px, q.y - py) > pad) continue;

    const Edge& edge = edges_[ref.edge];
    LatLon snapped;
    if (t <= 0.0) {
      snapped = edge.geometry[ref.segment];
    } else if (t >= 1.0) {
      snapped = edge.geometry[ref.segment + 1];
    } else {
      snapped = frame_.to_latlon({px, py});
    }
    const auto& offsets = vertex_offsets_[ref.edge];
    SnappedPoint sp;
    sp.edge_id = edge.id;
    sp.offset_m = std::clamp(offsets[ref.segment] + t * (offsets[ref.segment + 1] - offsets[ref.segment]), 0.0,
                             edge.length_m);
    sp.snapped = snapped;
    sp.snap_distance_m = haversine(p, snapped);
    if (sp.snap_distance_m > radius_m) continue;
    if (!best.empty() && best.back().edge_id == edge.id) {
      if (snap_less(sp, best.back())) best.back() = sp;
    } else {
      best.push_back(sp);
    }
  }
  std::sort(best.begin(), best.end(), snap_less);
  return best;
}

std::vector<SnappedPoint> RoadNetwork::snap_candidates(LatLon p, double radius_m, std::size_t max_count) const {
  if (!is_valid(p)) fail(ErrorCategory::input, "fix coordinates out of range");
  auto result = scan(p, radius_m);
  if (result.size() > max_count) result.resize(max_count);
  return result;
}

std::vector<SnappedPoint> RoadNetwork::snap_candidates(const GpsFix& fix, double radius_m,
                                                       std::size_t max_count) const {
  auto result = snap_candidates(fix.position, radius_m, max_count);
  for (auto& sp : result) sp.source_fix = fix;
  return result;
}

// ---------------------------------------------------------------------------
// GeoJSON

namespace {

// Line number of each element of the top-level "features" array.
std::vector<std::size_t> feature_start_lines(std::string_view text) {
  std::vector<std::size_t> lines;
  std::size_t line = 1;
  int depth = 0;
  int features_depth = -1;
  bool in_string = false;
  bool escape = false;
  bool expect_features = false;
  std::string current;
  std::string last_string;
  for (char c : text) {
    if (c == '\n') ++line;
    if (in_string) {
      if (escape) {
        escape = false;
        current += c;
      } else if (c == '\\') {
        escape = true;
      } else if (c == '"') {
        in_string = false;
        last_string = current;
      } else if (current.size() < 16) {
        current += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        current.clear();
        break;
      case ':':
        expect_features = depth == 1 && last_string == "features";
        break;
      case '[':
        ++depth;
        if (expect_features) features_depth = depth;
        expect_features = false;
        break;
      case '{':
        ++depth;
        if (features_depth > 0 && depth == features_depth + 1) lines.push_back(line);
        expect_features = false;
        break;
      case ']':
        if (depth == features_depth) features_depth = -1;
        --depth;
        break;
      case '}':
        --depth;
        break;
      case ' ':
      case '\t':
      case '\r':
      case '\n':
      case ',':
        break;
      default:
        expect_features = false;
        break;
    }
  }
  return lines;
}

std::size_t line_of_byte(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

LatLon read_position(const nlohmann::json& pos, const std::string& where) {
  if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
    fail(ErrorCategory::parse, where + ": position must be [lon, lat]");
  }
  LatLon p{pos[1].get<double>(), pos[0].get<double>()};
  if (!is_valid(p)) fail(ErrorCategory::validation, where + ": coordinate out of range");
  return p;
}

std::int64_t require_int(const nlohmann::json& props, const char* key, const std::string& where) {
  auto it = props.find(key);
  if (it == props.end()) fail(ErrorCategory::schema, fmt::format("{}: missing property '{}'", where, key));
  if (!it->is_number_integer()) fail(ErrorCategory::parse, fmt::format("{}: property '{}' must be an integer", where, key));
  return it->get<std::int64_t>();
}

}  // namespace

RoadNetwork parse_network_geojson(std::string_view text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& ex) {
    fail(ErrorCategory::parse, fmt::format("{}:{}: malformed JSON ({})", source, line_of_byte(text, ex.byte), ex.what()));
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    fail(ErrorCategory::schema, source + ": expected a GeoJSON FeatureCollection");
  }
  const auto lines = feature_start_lines(text);
  const auto& features = doc["features"];

  std::vector<Node> explicit_nodes;
  std::vector<Edge> edges;
  struct Endpoint {
    NodeId id;
    LatLon position;
    std::string where;
  };
  std::vector<Endpoint> endpoints;

  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string where =
        fmt::format("{}:{}", source, i < lines.size() ? lines[i] : line_of_byte(text, text.size()));
    const auto& f = features[i];
    if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) {
      fail(ErrorCategory::parse, where + ": feature without geometry");
    }
    const auto& geom = f["geometry"];
    const std::string type = geom.value("type", "");
    const nlohmann::json props = f.contains("properties") && f["properties"].is_object() ? f["properties"]
                                                                                          : nlohmann::json::object();
    if (type == "Point") {
      if (!props.contains("node_id")) continue;  // unrelated annotation
      explicit_nodes.push_back({require_int(props, "node_id", where), read_position(geom["coordinates"], where)});
      continue;
    }
    if (type != "LineString") fail(ErrorCategory::schema, where + ": unsupported geometry type '" + type + "'");

    Edge e;
    e.id = require_int(props, "edge_id", where);
    e.from = require_int(props, "from_node", where);
    e.to = require_int(props, "to_node", where);
    auto speed = props.find("speed_limit_kmh");
    if (speed == props.end()) fail(ErrorCategory::schema, where + ": missing property 'speed_limit_kmh'");
    if (!speed->is_number()) fail(ErrorCategory::parse, where + ": 'speed_limit_kmh' must be a number");
    e.speed_limit_kmh = speed->get<double>();
    auto oneway = props.find("oneway");
    if (oneway == props.end()) fail(ErrorCategory::schema, where + ": missing property 'oneway'");
    if (!oneway->is_boolean()) fail(ErrorCategory::parse, where + ": 'oneway' must be a boolean");
    e.oneway = oneway->get<bool>();
    if (auto len = props.find("length_m"); len != props.end() && !len->is_null()) {
      if (!len->is_number() || !(len->get<double>() > 0.0)) {
        fail(ErrorCategory::validation, where + ": 'length_m' must be a positive number");
      }
      e.length_m = len->get<double>();
    }
    const auto& coords = geom["coordinates"];
    if (!coords.is_array() || coords.size() < 2) fail(ErrorCategory::parse, where + ": LineString needs 2 positions");
    for (const auto& pos : coords) e.geometry.push_back(read_position(pos, where));
    endpoints.push_back({e.from, e.geometry.front(), where});
    endpoints.push_back({e.to, e.geometry.back(), where});
    edges.push_back(std::move(e));
  }

  std::vector<Node> nodes;
  std::unordered_map<NodeId, LatLon> known;
  if (!explicit_nodes.empty()) {
    nodes = explicit_nodes;
    for (const auto& n : nodes) known.emplace(n.id, n.position);
    for (const auto& ep : endpoints) {
      auto it = known.find(ep.id);
      if (it == known.end()) fail(ErrorCategory::validation, fmt::format("{}: edge references missing node {}", ep.where, ep.id));
      if (haversine(it->second, ep.position) > 1.0) {
        fail(ErrorCategory::validation, fmt::format("{}: endpoint does not coincide with node {}", ep.where, ep.id));
      }
    }
  } else {
    for (const auto& ep : endpoints) {
      auto [it, inserted] = known.emplace(ep.id, ep.position);
      if (inserted) {
        nodes.push_back({ep.id, ep.position});
      } else if (haversine(it->second, ep.position) > 1.0) {
        fail(ErrorCategory::validation, fmt::format("{}: node {} has inconsistent coordinates", ep.where, ep.id));
      }
    }
  }
  try {
    return RoadNetwork(std::move(nodes), std::move(edges));
  } catch (const Error& ex) {
    throw Error(kModule, ex.category(), source + ": " + ex.what());
  }
}

RoadNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open network file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network_geojson(buf.str(), path.string());
}

std::string network_to_geojson(const RoadNetwork& net) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[\n";
  bool first = true;
  auto emit = [&](const nlohmann::json& feature) {
    if (!first) out += ",\n";
    first = false;
    out += feature.dump();
  };
  for (const auto& n : net.nodes()) {
    emit({{"type", "Feature"},
          {"geometry", {{"type", "Point"}, {"coordinates", {n.position.lon, n.position.lat}}}},
          {"properties", {{"node_id", n.id}}}});
  }
  for (const auto& e : net.edges()) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : e.geometry) coords.push_back({p.lon, p.lat});
    emit({{"type", "Feature"},
          {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
          {"properties",
           {{"edge_id", e.id},
            {"from_node", e.from},
            {"to_node", e.to},
            {"speed_limit_kmh", e.speed_limit_kmh},
            {"oneway", e.oneway}}}});
  }
  out += "\n]}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Queries

SnappedPoint nearest_network_point(const GpsFix& fix, const RoadNetwork& net) {
  if (net.empty()) fail(ErrorCategory::input, "nearest point query on an empty network");
  for (double radius = 100.0; radius < 1e7; radius *= 4.0) {
    auto found = net.snap_candidates(fix, radius, 1);
    if (!found.empty()) return found.front();
  }
  auto found = net.snap_candidates(fix, kInfinity, 1);
  return found.front();
}

double effective_speed(double sp_g_kmh, double sp_c_kmh) {
  if (!(sp_g_kmh > 0.0) || !(sp_c_kmh > 0.0)) {
    fail(ErrorCategory::input, fmt::format("speeds must be positive (sp_g={}, sp_c={})", sp_g_kmh, sp_c_kmh));
  }
  return sp_g_kmh <= sp_c_kmh ? sp_g_kmh : sp_c_kmh;
}

// ---------------------------------------------------------------------------
// Router

namespace {

struct DijkstraScratch {
  std::vector<double> cost;
  std::vector<std::size_t> touched;

  void prepare(std::size_t n) {
    if (cost.size() < n) cost.assign(n, kInfinity);
    for (auto i : touched) cost[i] = kInfinity;
    touched.clear();
  }
};

thread_local DijkstraScratch scratch;

}  // namespace

Router::Router(const RoadNetwork& net, double operator_speed_kmh)
    : net_(&net), operator_speed_kmh_(operator_speed_kmh) {
  if (!(operator_speed_kmh > 0.0)) fail(ErrorCategory::input, "operator speed limit must be positive");
  out_arcs_.resize(net.nodes().size());
  seconds_per_meter_.resize(net.edges().size());
  for (std::size_t i = 0; i < net.edges().size(); ++i) {
    const Edge& e = net.edges()[i];
    seconds_per_meter_[i] = 3.6 / effective_speed(e.speed_limit_kmh, operator_speed_kmh);
    const std::size_t from = net.node_index(e.from);
    const std::size_t to = net.node_index(e.to);
    const double t = e.length_m * seconds_per_meter_[i];
    out_arcs_[from].push_back({i, to, e.length_m, t});
    if (!e.oneway) out_arcs_[to].push_back({i, from, e.length_m, t});
  }
}

double Router::weight_per_meter(std::size_t edge_index, RouteMetric metric) const {
  return metric == RouteMetric::distance ? 1.0 : seconds_per_meter_[edge_index];
}

bool Router::allows(const NetworkLocation& loc) const {
  return loc.travel == Travel::forward || !net_->edge(loc.edge).oneway;
}

Router::Search Router::search(const NetworkLocation& from, RouteMetric metric, double bound,
                              bool allow_reversal) const {
  if (!allows(from)) fail(ErrorCategory::contract, fmt::format("edge {} is one-way", from.edge));
  Search result;
  result.router_ = this;
  result.from_ = from;
  result.metric_ = metric;
  result.bound_ = bound;
  result.allow_reversal_ = allow_reversal;

  const std::size_t ei = net_->edge_index(from.edge);
  const Edge& e = net_->edges()[ei];
  const double w = weight_per_meter(ei, metric);
  const double off = std::clamp(from.offset_m, 0.0, e.length_m);
  const std::size_t head = net_->node_index(from.travel == Travel::forward ? e.to : e.from);
  const std::size_t back = net_->node_index(from.travel == Travel::forward ? e.from : e.to);
  const double start = (from.travel == Travel::forward ? e.length_m - off : off) * w;
  if (start > bound) return result;

  scratch.prepare(out_arcs_.size());
  auto& cost = scratch.cost;
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  cost[head] = start;
  scratch.touched.push_back(head);
  queue.push({start, head});
  while (!queue.empty()) {
    auto [c, u] = queue.top();
    queue.pop();
    if (c > cost[u]) continue;
    result.settled_.emplace_back(u, c);
    for (const Arc& arc : out_arcs_[u]) {
      if (!allow_reversal && arc.edge == ei && arc.head == back) continue;
      const double nc = c + (metric == RouteMetric::distance ? arc.length_m : arc.time_s);
      if (nc > bound || nc >= cost[arc.head]) continue;
      if (cost[arc.head] == kInfinity) scratch.touched.push_back(arc.head);
      cost[arc.head] = nc;
      queue.push({nc, arc.head});
    }
  }
  std::sort(result.settled_.begin(), result.settled_.end());
  return result;
}

double Router::Search::cost_to(const NetworkLocation& to) const {
  if (router_ == nullptr || !router_->allows(to)) return kInfinity;
  const RoadNetwork& net = router_->network();
  const std::size_t ei = net.edge_index(to.edge);
  const Edge& e = net.edges()[ei];
  const double w = router_->weight_per_meter(ei, metric_);
  const double off = std::clamp(to.offset_m, 0.0, e.length_m);

  double best = kInfinity;
  if (to.edge == from_.edge && to.travel == from_.travel) {
    const double from_off = std::clamp(from_.offset_m, 0.0, e.length_m);
    const double ahead = to.travel == Travel::forward ? off - from_off : from_off - off;
    if (ahead >= 0.0) best = ahead * w;
  }
  if (!allow_reversal_ && to.edge == from_.edge && to.travel != from_.travel) return kInfinity;
  const std::size_t tail = net.node_index(to.travel == Travel::forward ? e.from : e.to);
  auto it = std::lower_bound(settled_.begin(), settled_.end(), std::pair<std::size_t, double>{tail, -kInfinity});
  if (it != settled_.end() && it->first == tail) {
    const double extra = (to.travel == Travel::forward ? off : e.length_m - off) * w;
    best = std::min(best, it->second + extra);
  }
  return best > bound_ ? kInfinity : best;
}

double Router::cost(const NetworkLocation& from, const NetworkLocation& to, RouteMetric metric, double bound,
                    bool allow_reversal) const {
  return search(from, metric, bound, allow_reversal).cost_to(to);
}

double theoretical_travel_time(const Router& router, const SnappedPoint& from, const SnappedPoint& to) {
  double best = kInfinity;
  for (Travel tf : {Travel::forward, Travel::backward}) {
    NetworkLocation a{from.edge_id, from.offset_m, tf};
    if (!router.allows(a)) continue;
    auto search = router.search(a, RouteMetric::time);
    for (Travel tt : {Travel::forward, Travel::backward}) {
      best = std::min(best, search.cost_to({to.edge_id, to.offset_m, tt}));
    }
  }
  if (!std::isfinite(best)) {
    fail(ErrorCategory::unreachable,
         fmt::format("no directed path from edge {} to edge {}", from.edge_id, to.edge_id));
  }
  return best;
}

double theoretical_travel_time(const RoadNetwork& net, const SnappedPoint& from, const SnappedPoint& to,
                               double sp_c_kmh) {
  return theoretical_travel_time(Router(net, sp_c_kmh), from, to);
}

}  // namespace dtqs
