#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include <json.hpp>

#include "dtqs/error.hpp"
#include "dtqs/io.hpp"
#include "dtqs/reporting.hpp"

using namespace dtqs;

namespace {

// bus id, observations, point, stop, others
struct Row {
  const char* bus;
  std::size_t obs;
  double pd, std, others;
};

const Row kTableRows[] = {
    {"1", 4142, 21, 65, 14},     {"17", 18707, 26, 58, 16},   {"23", 15633, 23, 67, 10},
    {"7", 87219, 24, 67, 9},     {"16", 1476, 25, 65, 10},    {"14", 37308, 23, 66, 11},
    {"8", 18798, 26, 62, 12},    {"4", 62321, 24, 62, 14},    {"10", 94787, 26, 61, 13},
    {"5", 61186, 25, 65, 10},    {"19", 67195, 22, 67, 11},   {"25", 116231, 21, 67, 12},
    {"15", 91086, 20, 68, 12},   {"24", 128582, 25, 65, 10},  {"2", 391373, 25, 64, 11},
    {"3", 299737, 21, 65, 14},
};

BusTrajectory trajectory(const std::string& bus, double std_s, double pd_s, double tps_s, double tpl_s,
                         double slack_s, std::size_t obs = 10) {
  BusTrajectory t;
  t.bus_id = bus;
  t.observations = obs;
  t.breakdown.stop_dwell_s = std_s;
  t.breakdown.point_delay_s = pd_s;
  t.breakdown.transit_short_s = tps_s;
  t.breakdown.transit_long_s = tpl_s;
  t.breakdown.slack_s = slack_s;
  t.breakdown.total_s = std_s + pd_s + tps_s + tpl_s + slack_s;
  return t;
}

}  // namespace

TEST_CASE("confidence interval") {
  const auto ci = confidence_interval(std::vector<double>{1, 2, 3});
  CHECK(ci.low == doctest::Approx(2.0 - 1.96 / std::sqrt(3.0)));
  CHECK(ci.high == doctest::Approx(2.0 + 1.96 / std::sqrt(3.0)));
  CHECK(ci.low == doctest::Approx(0.868).epsilon(1e-3));
  CHECK_THROWS_AS(confidence_interval(std::vector<double>{4.0}), Error);
}

TEST_CASE("table rows reproduce the printed intervals") {
  DelayShareTable table;
  for (const auto& r : kTableRows) table.rows.push_back({r.bus, r.obs, r.pd, r.std, r.others});
  fill_confidence_intervals(table);
  REQUIRE(table.point_ci);
  CHECK(std::fabs(table.point_ci->low - 22.57) <= 0.01);
  CHECK(std::fabs(table.point_ci->high - 24.56) <= 0.01);
  CHECK(std::fabs(table.stop_ci->low - 63.31) <= 0.01);
  CHECK(std::fabs(table.stop_ci->high - 65.94) <= 0.01);
  CHECK(std::fabs(table.others_ci->low - 10.86) <= 0.01);
  CHECK(std::fabs(table.others_ci->high - 12.76) <= 0.01);
  const auto csv = summary_csv(table);
  CHECK(csv.find("ci95,1495781,22.57..24.56,63.31..65.94,10.86..12.76\n") != std::string::npos);
}

TEST_CASE("share table from breakdowns") {
  const std::vector<BusTrajectory> one{trajectory("P1", 65, 25, 4, 0, 6)};
  const auto t = delay_share_table(one);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].point_delay_pct == doctest::Approx(25.0));
  CHECK(t.rows[0].stop_delay_pct == doctest::Approx(65.0));
  CHECK(t.rows[0].others_pct == doctest::Approx(10.0));
  CHECK_FALSE(t.point_ci.has_value());
  CHECK(summary_csv(t) == "bus_id,observations,point_delay_pct,stop_delay_pct,others_pct\n"
                          "P1,10,25.00,65.00,10.00\n"
                          "ci95,10,n/a,n/a,n/a\n");

  // trajectories aggregate by bus; zero-total buses drop out
  const std::vector<BusTrajectory> many{trajectory("B", 10, 10, 0, 0, 0, 3), trajectory("A", 30, 10, 5, 5, 0, 4),
                                        trajectory("B", 30, 0, 0, 0, 0, 5), trajectory("Z", 0, 0, 0, 0, 0)};
  const auto m = delay_share_table(many);
  REQUIRE(m.rows.size() == 2);
  CHECK(m.rows[0].bus_id == "A");
  CHECK(m.rows[1].bus_id == "B");
  CHECK(m.rows[1].observations == 8);
  CHECK(m.rows[1].stop_delay_pct == doctest::Approx(80.0));
  CHECK(m.omitted == std::vector<std::string>{"Z"});
  for (const auto& r : m.rows) CHECK(r.point_delay_pct + r.stop_delay_pct + r.others_pct == doctest::Approx(100.0));
  CHECK(m.point_ci.has_value());
}

TEST_CASE("p-value histogram") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(1000);
  for (double& v : p) v = u(rng);
  const auto h = pvalue_histogram(p, 20);
  std::size_t total = 0;
  for (std::size_t c : h) {
    CHECK(std::fabs(static_cast<double>(c) - 50.0) <= 3.0 * std::sqrt(50.0 * 0.95));
    total += c;
  }
  CHECK(total == 1000);
  CHECK(pvalue_histogram(std::vector<double>(7, 0.0), 20)[0] == 7);
  CHECK(pvalue_histogram(std::vector<double>{1.0, 0.05, 0.0499}, 20) == [] {
    std::vector<std::size_t> v(20, 0);
    v[19] = 1;
    v[1] = 1;
    v[0] = 1;
    return v;
  }());
  CHECK_THROWS_AS(pvalue_histogram(p, 0), Error);
  const auto csv = pvalue_histogram_csv(pvalue_histogram(std::vector<double>{0.3}, 2));
  CHECK(csv == "bin_low,bin_high,count\n0.0000,0.5000,1\n0.5000,1.0000,0\n");
}

TEST_CASE("geojson export round-trips") {
  ClassifiedPoint a;
  a.cluster_id = "7/1/0:3";
  a.route_label = "7/1/0";
  a.lat = 48.851234;
  a.lon = 2.351234;
  a.n = 40;
  a.p_raw = 0.0001234;
  a.p_adjusted = 0.0024;
  a.cls = SignificanceClass::strong_significant;
  a.mean_real_s = 41.5;
  a.mean_theo_s = 20.25;
  a.test_used = TestKind::wilcoxon;
  const auto dir = std::filesystem::temp_directory_path() / "dtqs_reporting_test";
  std::filesystem::create_directories(dir);
  export_geojson(std::vector<ClassifiedPoint>{a}, dir / "points.geojson");
  const auto doc = nlohmann::json::parse(read_text_file(dir / "points.geojson", "test"));
  CHECK(doc["type"] == "FeatureCollection");
  REQUIRE(doc["features"].size() == 1);
  const auto& f = doc["features"][0];
  CHECK(f["geometry"]["type"] == "Point");
  CHECK(f["geometry"]["coordinates"][0].get<double>() == a.lon);
  CHECK(f["geometry"]["coordinates"][1].get<double>() == a.lat);
  const auto& p = f["properties"];
  CHECK(p["cluster_id"] == a.cluster_id);
  CHECK(p["p_raw"].get<double>() == a.p_raw);
  CHECK(p["p_adjusted"].get<double>() == a.p_adjusted);
  CHECK(p["class"] == "strong_significant");
  CHECK(p["color"] == "blue");
  CHECK(p["n"].get<std::size_t>() == 40);
  CHECK(p["mean_real_s"].get<double>() == a.mean_real_s);
  CHECK(p["mean_theo_s"].get<double>() == a.mean_theo_s);

  const auto empty = nlohmann::json::parse(classified_points_geojson({}));
  CHECK(empty["features"].empty());
  CHECK_THROWS_AS(export_geojson({}, dir / "missing" / "sub" / "x.geojson"), Error);

  const auto html = map_html(std::vector<ClassifiedPoint>{a});
  CHECK(html.find("7/1/0:3") != std::string::npos);
  CHECK(html.find("L.geoJSON") != std::string::npos);
  std::filesystem::remove_all(dir);
}
