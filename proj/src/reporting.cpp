#include "dtqs/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "dtqs/csv.hpp"
#include "dtqs/error.hpp"
#include "dtqs/io.hpp"

namespace dtqs {
namespace {

const std::string kModule = "reporting";

std::string pct(double v) { return fmt::format("{:.2f}", v); }

std::string ci_cell(const std::optional<Interval>& ci) {
  return ci ? fmt::format("{:.2f}..{:.2f}", ci->low, ci->high) : std::string("n/a");
}

}  // namespace

Interval confidence_interval(std::span<const double> values, double z) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(kModule, ErrorCategory::input, fmt::format("confidence interval needs n >= 2, got {}", n));
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double half = z * std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  return {mean - half, mean + half};
}

DelayShareTable delay_share_table(std::span<const BusTrajectory> trajectories) {
  struct Acc {
    std::size_t obs = 0;
    double stop = 0.0, point = 0.0, others = 0.0;
  };
  std::map<std::string, Acc> by_bus;
  for (const auto& t : trajectories) {
    auto& a = by_bus[t.bus_id];
    a.obs += t.observations;
    a.stop += t.breakdown.stop_dwell_s;
    a.point += t.breakdown.point_delay_s;
    a.others += t.breakdown.transit_short_s + t.breakdown.transit_long_s + t.breakdown.slack_s;
  }
  DelayShareTable table;
  for (const auto& [bus, a] : by_bus) {
    const double total = a.stop + a.point + a.others;
    if (!(total > 0.0)) {
      spdlog::warn("bus {} has zero total time; omitted from the share table", bus);
      table.omitted.push_back(bus);
      continue;
    }
    table.rows.push_back({bus, a.obs, 100.0 * a.point / total, 100.0 * a.stop / total, 100.0 * a.others / total});
  }
  fill_confidence_intervals(table);
  return table;
}

void fill_confidence_intervals(DelayShareTable& table, double z) {
  table.point_ci.reset();
  table.stop_ci.reset();
  table.others_ci.reset();
  if (table.rows.size() < 2) return;
  std::vector<double> p, s, o;
  for (const auto& r : table.rows) {
    p.push_back(r.point_delay_pct);
    s.push_back(r.stop_delay_pct);
    o.push_back(r.others_pct);
  }
  table.point_ci = confidence_interval(p, z);
  table.stop_ci = confidence_interval(s, z);
  table.others_ci = confidence_interval(o, z);
}

std::string summary_csv(const DelayShareTable& table) {
  std::string out = "bus_id,observations,point_delay_pct,stop_delay_pct,others_pct\n";
  std::size_t obs = 0;
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{},{}\n", csv::escape(r.bus_id), r.observations, pct(r.point_delay_pct),
                       pct(r.stop_delay_pct), pct(r.others_pct));
    obs += r.observations;
  }
  out += fmt::format("ci95,{},{},{},{}\n", obs, ci_cell(table.point_ci), ci_cell(table.stop_ci),
                     ci_cell(table.others_ci));
  return out;
}

std::vector<std::size_t> pvalue_histogram(std::span<const double> pvals, std::size_t bins) {
  if (bins == 0) throw Error(kModule, ErrorCategory::input, "histogram needs at least one bin");
  std::vector<std::size_t> counts(bins, 0);
  for (double p : pvals) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(kModule, ErrorCategory::input, fmt::format("p-value {} outside [0, 1]", p));
    const auto b = std::min(bins - 1, static_cast<std::size_t>(p * static_cast<double>(bins)));
    ++counts[b];
  }
  return counts;
}

std::string pvalue_histogram_csv(std::span<const std::size_t> counts) {
  std::string out = "bin_low,bin_high,count\n";
  const double w = 1.0 / static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out += fmt::format("{:.4f},{:.4f},{}\n", w * static_cast<double>(i), w * static_cast<double>(i + 1), counts[i]);
  }
  return out;
}

std::string classified_points_geojson(std::span<const ClassifiedPoint> points) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& p : points) {
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {p.lon, p.lat}}}},
                        {"properties",
                         {{"cluster_id", p.cluster_id},
                          {"route", p.route_label},
                          {"p_raw", p.p_raw},
                          {"p_adjusted", p.p_adjusted},
                          {"class", std::string(to_string(p.cls))},
                          {"color", std::string(color_of(p.cls))},
                          {"n", p.n},
                          {"test_used", std::string(to_string(p.test_used))},
                          {"mean_real_s", p.mean_real_s},
                          {"mean_theo_s", p.mean_theo_s},
                          {"from_m", p.lo_m},
                          {"to_m", p.hi_m}}}});
  }
  return nlohmann::json({{"type", "FeatureCollection"}, {"features", features}}).dump(1) + "\n";
}

void export_geojson(std::span<const ClassifiedPoint> points, const std::filesystem::path& path) {
  write_text_file(path, classified_points_geojson(points), kModule);
}

std::string map_html(std::span<const ClassifiedPoint> points) {
  double lat = 0.0, lon = 0.0;
  for (const auto& p : points) {
    lat += p.lat;
    lon += p.lon;
  }
  if (!points.empty()) {
    lat /= static_cast<double>(points.size());
    lon /= static_cast<double>(points.size());
  }
  // The collection is inlined so it must not close the script element.
  std::string data = classified_points_geojson(points);
  for (std::size_t at = data.find("</"); at != std::string::npos; at = data.find("</", at + 3)) data.replace(at, 2, "<\\/");
  return fmt::format(R"(<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>point delays</title>
<link rel="stylesheet" href="https://unpkg.com/leaflet@1.9.4/dist/leaflet.css">
<script src="https://unpkg.com/leaflet@1.9.4/dist/leaflet.js"></script>
<style>html, body, #map {{ height: 100%; margin: 0; }}</style>
</head>
<body>
<div id="map"></div>
<script>
const points = {};
const map = L.map('map').setView([{:.6f}, {:.6f}], 14);
L.tileLayer('https://tile.openstreetmap.org/{{z}}/{{x}}/{{y}}.png', {{maxZoom: 19, attribution: '&copy; OpenStreetMap'}}).addTo(map);
L.geoJSON(points, {{
  pointToLayer: (f, ll) => L.circleMarker(ll, {{radius: 7, color: f.properties.color, fillOpacity: 0.8}}),
  onEachFeature: (f, layer) => layer.bindPopup(
    `${{f.properties.cluster_id}}<br>${{f.properties.class}}<br>p adj ${{f.properties.p_adjusted.toPrecision(3)}}` +
    `<br>real ${{f.properties.mean_real_s.toFixed(1)}} s / theo ${{f.properties.mean_theo_s.toFixed(1)}} s`)
}}).addTo(map);
</script>
</body>
</html>
)",
                     data, lat, lon);
}

}  // namespace dtqs
