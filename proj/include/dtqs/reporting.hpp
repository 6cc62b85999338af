#ifndef DTQS_REPORTING_HPP
#define DTQS_REPORTING_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtqs/significance.hpp"
#include "dtqs/trajectory_metrics.hpp"

namespace dtqs {

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

inline constexpr double kZ95 = 1.96;

/// mean +- z * sd / sqrt(n) with the n-1 sample sd. Needs n >= 2.
Interval confidence_interval(std::span<const double> values, double z = kZ95);

/// Delay components of one trajectory, attributed to a bus.
struct BusTrajectory {
  std::string bus_id;
  std::size_t observations = 0;  // kept fixes
  DelayBreakdown breakdown;
};

struct DelayShareRow {
  std::string bus_id;
  std::size_t observations = 0;
  double point_delay_pct = 0.0;
  double stop_delay_pct = 0.0;
  double others_pct = 0.0;
};

struct DelayShareTable {
  std::vector<DelayShareRow> rows;  // ordered by bus id
  std::optional<Interval> point_ci, stop_ci, others_ci;  // present with >= 2 rows
  std::vector<std::string> omitted;  // buses with zero total
};

/// Per-bus shares of stop dwell, point delay and everything else
/// (transit + slack) in the total time.
DelayShareTable delay_share_table(std::span<const BusTrajectory> trajectories);

/// CI row of a table built directly from rows.
void fill_confidence_intervals(DelayShareTable& table, double z = kZ95);

/// bus_id, observations, point_delay_pct, stop_delay_pct, others_pct; last row "ci95".
std::string summary_csv(const DelayShareTable& table);

/// Equal-width bins over [0, 1]; the last bin is closed.
std::vector<std::size_t> pvalue_histogram(std::span<const double> pvals, std::size_t bins);

/// bin_low, bin_high, count
std::string pvalue_histogram_csv(std::span<const std::size_t> counts);

struct ClassifiedPoint {
  std::string cluster_id;
  std::string route_label;
  double lat = 0.0;
  double lon = 0.0;
  double lo_m = 0.0;
  double hi_m = 0.0;
  std::size_t n = 0;
  TestKind test_used = TestKind::t;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  SignificanceClass cls = SignificanceClass::little_no_evidence;
  double mean_real_s = 0.0;
  double mean_theo_s = 0.0;
};

std::string classified_points_geojson(std::span<const ClassifiedPoint> points);
void export_geojson(std::span<const ClassifiedPoint> points, const std::filesystem::path& path);

/// Leaflet page with the point collection inlined.
std::string map_html(std::span<const ClassifiedPoint> points);

}  // namespace dtqs

#endif  // DTQS_REPORTING_HPP
