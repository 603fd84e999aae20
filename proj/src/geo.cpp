#include "drnav/geo.hpp"

#include <cmath>

#include <fmt/format.h>

#include "drnav/error.hpp"

namespace drnav {

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

GeoPoint GeoPoint::make(double lat, double lon) {
  GeoPoint p{lat, lon};
  if (!is_valid(p)) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("coordinate ({}, {}) outside valid range", lat, lon));
  }
  return p;
}

double geodesic_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, h)));
}

double initial_bearing_deg(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  return wrap_deg(std::atan2(y, x) * kRadToDeg);
}

Enu to_local_enu(const GeoPoint& origin, const GeoPoint& p) {
  if (geodesic_distance(origin, p) >= kMaxEnuRangeM) {
    throw Error(ErrorCode::kOutOfRange, "point is 100 km or more from the projection origin");
  }
  const double east = (p.lon - origin.lon) * kDegToRad * kEarthRadiusM * std::cos(origin.lat * kDegToRad);
  const double north = (p.lat - origin.lat) * kDegToRad * kEarthRadiusM;
  return {east, north};
}

GeoPoint from_local_enu(const GeoPoint& origin, const Enu& enu) {
  const double lat = origin.lat + enu.y() / kEarthRadiusM * kRadToDeg;
  const double lon =
      origin.lon + enu.x() / (kEarthRadiusM * std::cos(origin.lat * kDegToRad)) * kRadToDeg;
  return {lat, lon};
}

Enu heading_unit(double heading_deg) {
  const double h = heading_deg * kDegToRad;
  return {std::sin(h), std::cos(h)};
}

double wrap_deg(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;  // fmod of tiny negatives can round up to 360
  return w;
}

double angle_diff_deg(double to, double from) {
  double d = std::fmod(to - from, 360.0);
  if (d >= 180.0) d -= 360.0;
  if (d < -180.0) d += 360.0;
  return d;
}

double circular_mean_deg(std::span<const double> headings) {
  double s = 0.0;
  double c = 0.0;
  for (double h : headings) {
    s += std::sin(h * kDegToRad);
    c += std::cos(h * kDegToRad);
  }
  return wrap_deg(std::atan2(s, c) * kRadToDeg);
}

}  // namespace drnav
