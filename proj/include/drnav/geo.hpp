#pragma once

#include <Eigen/Core>
#include <span>

namespace drnav {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Latitude/longitude in degrees. Construct through `GeoPoint::make` to get
/// range validation; the aggregate form is used for already-validated data.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  static GeoPoint make(double lat, double lon);
  bool operator==(const GeoPoint&) const = default;
};

bool is_valid(const GeoPoint& p);

/// Great-circle distance on a sphere of radius kEarthRadiusM (haversine).
double geodesic_distance(const GeoPoint& a, const GeoPoint& b);

/// Initial bearing from a to b, degrees clockwise from north in [0, 360).
double initial_bearing_deg(const GeoPoint& a, const GeoPoint& b);

/// East/north offset in metres.
using Enu = Eigen::Vector2d;

inline constexpr double kMaxEnuRangeM = 100'000.0;

/// Equirectangular projection about `origin`. Throws kOutOfRange when `p` is
/// 100 km or more from `origin`.
Enu to_local_enu(const GeoPoint& origin, const GeoPoint& p);
GeoPoint from_local_enu(const GeoPoint& origin, const Enu& enu);

/// Unit vector (east, north) for a heading in degrees clockwise from north.
Enu heading_unit(double heading_deg);

// Angles in degrees.
double wrap_deg(double deg);                     // -> [0, 360)
double angle_diff_deg(double to, double from);   // -> [-180, 180)
double circular_mean_deg(std::span<const double> headings);

}  // namespace drnav
