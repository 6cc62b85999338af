#ifndef DTQS_GEO_HPP
#define DTQS_GEO_HPP

namespace dtqs {

/// Spherical Earth radius in meters.
inline constexpr double kEarthRadiusM = 6371000.0;

struct LatLon {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

bool is_valid(LatLon p) noexcept;

/// Great-circle distance in meters. Throws dtqs::Error (input) when either
/// coordinate is out of range.
double haversine(LatLon a, LatLon b);

/// Initial bearing from a to b, degrees clockwise from north in [0, 360).
double initial_bearing(LatLon a, LatLon b) noexcept;

/// Absolute angular difference between two bearings, in [0, 180].
double bearing_difference(double a_deg, double b_deg) noexcept;

struct PlanarPoint {
  double x = 0.0;  // meters east of the frame origin
  double y = 0.0;  // meters north of the frame origin
};

/// Equirectangular projection around a fixed origin. Accurate to well under
/// a meter over the extent of a city network.
class LocalFrame {
 public:
  LocalFrame() = default;
  explicit LocalFrame(LatLon origin) noexcept;

  PlanarPoint to_planar(LatLon p) const noexcept;
  LatLon to_latlon(PlanarPoint p) const noexcept;
  LatLon origin() const noexcept { return origin_; }

 private:
  LatLon origin_{};
  double meters_per_deg_lat_ = 0.0;
  double meters_per_deg_lon_ = 0.0;
};

/// Moves p by the given metric offsets using the local tangent plane at p.
LatLon offset_by_meters(LatLon p, double east_m, double north_m) noexcept;

}  // namespace dtqs

#endif  // DTQS_GEO_HPP
