#ifndef RUC_GEODESY_HPP
#define RUC_GEODESY_HPP

namespace ruc {

// Mean earth radius in meters; fixed so downstream values are bit-stable.
inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

double deg2rad(double deg);
double rad2deg(double rad);

// Geographic fix in decimal degrees, lat in [-90, 90], lon in [-180, 180].
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Great-circle distance in meters on the mean-radius sphere.
// Total over valid inputs: symmetric, non-negative, at most pi * R.
double haversine_distance(const GeoPoint& a, const GeoPoint& b);

// Initial bearing from a towards b in radians, range (-pi, pi].
// 0 = north, pi/2 = east, -pi/2 = west, pi = south.
// Coincident points return 0 by convention.
double initial_bearing(const GeoPoint& a, const GeoPoint& b);

// Point reached from `start` after travelling `distance_m` along the great
// circle with the given initial bearing. Longitude is wrapped to [-180, 180).
GeoPoint destination_point(const GeoPoint& start, double bearing_rad, double distance_m);

}  // namespace ruc

#endif  // RUC_GEODESY_HPP
