#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace voyagecast::geo {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kKmPerNauticalMile = 1.852;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double d) { return d * (kPi / 180.0); }
inline constexpr double rad2deg(double r) { return r * (180.0 / kPi); }

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Validated constructor: lat must lie in [-90, 90]; lon is wrapped into
/// [-180, 180]. Throws std::invalid_argument on non-finite or out-of-range
/// latitude.
GeoPoint make_point(double lat, double lon);

bool is_valid(const GeoPoint& p);

/// Per-message motion descriptors. Speeds in knots, dv in knots/hour,
/// angles in gradians.
struct Kinematics {
  double v = 0.0;
  double dv = 0.0;
  double theta = 0.0;   // [0, 400)
  double dtheta = 0.0;  // [-200, 200]
};

/// Great-circle distance on a sphere of radius 6371 km. Uses the spherical
/// law of cosines, switching to the haversine form when the cosine argument
/// is too close to 1 to be well conditioned.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// Initial great-circle bearing from a to b in degrees, [0, 360).
/// Throws std::domain_error("undefined bearing") for coincident points.
double bearing_deg(const GeoPoint& a, const GeoPoint& b);

/// Degrees to gradians, wrapped into [0, 400).
double to_gradian(double deg);
/// Gradians to degrees without wrapping.
double from_gradian(double grad);

/// Distance per elapsed hours in knots. Throws std::invalid_argument
/// ("non-positive interval") when dt_hours <= 0.
double speed_knots(const GeoPoint& a, const GeoPoint& b, double dt_hours);

/// theta2 - theta1 wrapped into [-180, 180] by adding or subtracting 360.
double delta_bearing(double theta1_deg, double theta2_deg);

/// Kinematics for every point of a time-ordered polyline. Point i > 0 uses
/// the segment (i-1, i); point 0 copies the values of point 1. Coincident
/// consecutive points keep the previous bearing. Timestamps in seconds,
/// strictly increasing.
std::vector<Kinematics> kinematics_series(std::span<const GeoPoint> points,
                                          std::span<const std::int64_t> timestamps);

}  // namespace voyagecast::geo
