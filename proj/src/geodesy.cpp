#include "ruc/geodesy.hpp"

#include <algorithm>
#include <cmath>

namespace ruc {

double deg2rad(double deg) { return deg * (kPi / 180.0); }
double rad2deg(double rad) { return rad * (180.0 / kPi); }

double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = deg2rad(a.lat);
  const double lat2 = deg2rad(b.lat);
  const double half_dlat = std::sin((lat2 - lat1) / 2.0);
  const double half_dlon = std::sin(deg2rad(b.lon - a.lon) / 2.0);
  const double h = half_dlat * half_dlat +
                   std::cos(lat1) * std::cos(lat2) * half_dlon * half_dlon;
  // h can creep past 1 by a rounding ulp near the antipode
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(h, 1.0)));
}

double initial_bearing(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = deg2rad(a.lat);
  const double lat2 = deg2rad(b.lat);
  const double dlon = deg2rad(b.lon - a.lon);
  const double x = std::cos(lat2) * std::sin(dlon);
  const double y = std::cos(lat1) * std::sin(lat2) -
                   std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  if (x == 0.0 && y == 0.0) return 0.0;  // coincident or antipodal on the same meridian axis
  const double beta = std::atan2(x, y);
  // atan2 yields [-pi, pi]; fold the signed-zero corner case onto (-pi, pi]
  return beta <= -kPi ? kPi : beta;
}

GeoPoint destination_point(const GeoPoint& start, double bearing_rad, double distance_m) {
  const double delta = distance_m / kEarthRadiusM;
  const double lat1 = deg2rad(start.lat);
  const double lon1 = deg2rad(start.lon);
  const double sin_lat2 = std::sin(lat1) * std::cos(delta) +
                          std::cos(lat1) * std::sin(delta) * std::cos(bearing_rad);
  const double lat2 = std::asin(std::clamp(sin_lat2, -1.0, 1.0));
  const double lon2 = lon1 + std::atan2(std::sin(bearing_rad) * std::sin(delta) * std::cos(lat1),
                                        std::cos(delta) - std::sin(lat1) * sin_lat2);
  double lon_deg = std::fmod(rad2deg(lon2) + 540.0, 360.0) - 180.0;
  return GeoPoint{std::clamp(rad2deg(lat2), -90.0, 90.0), lon_deg};
}

}  // namespace ruc
