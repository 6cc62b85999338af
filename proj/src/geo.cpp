#include "dtqs/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dtqs/error.hpp"

namespace dtqs {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

bool is_valid(LatLon p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

double haversine(LatLon a, LatLon b) {
  if (!is_valid(a) || !is_valid(b)) {
    throw Error("geo", ErrorCategory::input,
                "coordinate out of range: (" + std::to_string(a.lat) + ", " + std::to_string(a.lon) +
                    ") -> (" + std::to_string(b.lat) + ", " + std::to_string(b.lon) + ")");
  }
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, h)));
}

double initial_bearing(LatLon a, LatLon b) noexcept {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = std::atan2(y, x) * kRadToDeg;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double bearing_difference(double a_deg, double b_deg) noexcept {
  double diff = std::fmod(std::fabs(a_deg - b_deg), 360.0);
  return diff > 180.0 ? 360.0 - diff : diff;
}

LocalFrame::LocalFrame(LatLon origin) noexcept
    : origin_(origin),
      meters_per_deg_lat_(kEarthRadiusM * kDegToRad),
      meters_per_deg_lon_(kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad)) {}

PlanarPoint LocalFrame::to_planar(LatLon p) const noexcept {
  return {(p.lon - origin_.lon) * meters_per_deg_lon_, (p.lat - origin_.lat) * meters_per_deg_lat_};
}

LatLon LocalFrame::to_latlon(PlanarPoint p) const noexcept {
  return {origin_.lat + p.y / meters_per_deg_lat_, origin_.lon + p.x / meters_per_deg_lon_};
}

LatLon offset_by_meters(LatLon p, double east_m, double north_m) noexcept {
  return LocalFrame(p).to_latlon({east_m, north_m});
}

}  // namespace dtqs
