#include "voyagecast/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace voyagecast::geo {

namespace {

// Below this angular separation (radians) the cosine form loses digits.
constexpr double kCosineFormMinAngle = 1e-2;
const double kCosineFormMaxArg = std::cos(kCosineFormMinAngle);

double wrap_lon(double lon) {
  if (lon >= -180.0 && lon <= 180.0) return lon;
  double w = std::fmod(lon + 180.0, 360.0);
  if (w < 0.0) w += 360.0;
  return w - 180.0;
}

}  // namespace

GeoPoint make_point(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon)) {
    throw std::invalid_argument("non-finite coordinate");
  }
  if (lat < -90.0 || lat > 90.0) {
    throw std::invalid_argument("latitude out of range");
  }
  return GeoPoint{lat, wrap_lon(lon)};
}

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dlon = deg2rad(b.lon - a.lon);
  const double c = std::sin(phi1) * std::sin(phi2) + std::cos(phi1) * std::cos(phi2) * std::cos(dlon);
  if (c < kCosineFormMaxArg) {
    return std::acos(std::max(-1.0, c)) * kEarthRadiusKm;
  }
  const double sdlat = std::sin((phi2 - phi1) / 2.0);
  const double sdlon = std::sin(dlon / 2.0);
  const double h = sdlat * sdlat + std::cos(phi1) * std::cos(phi2) * sdlon * sdlon;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double bearing_deg(const GeoPoint& a, const GeoPoint& b) {
  if (a == b) throw std::domain_error("undefined bearing");
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dlon = deg2rad(b.lon - a.lon);
  const double y = std::sin(dlon) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlon);
  double deg = rad2deg(std::atan2(y, x));
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double to_gradian(double deg) {
  double g = std::fmod(deg * (400.0 / 360.0), 400.0);
  if (g < 0.0) g += 400.0;
  if (g >= 400.0) g -= 400.0;
  return g;
}

double from_gradian(double grad) { return grad * (360.0 / 400.0); }

double speed_knots(const GeoPoint& a, const GeoPoint& b, double dt_hours) {
  if (!(dt_hours > 0.0)) throw std::invalid_argument("non-positive interval");
  return haversine_km(a, b) / kKmPerNauticalMile / dt_hours;
}

double delta_bearing(double theta1_deg, double theta2_deg) {
  double d = theta2_deg - theta1_deg;
  while (d > 180.0) d -= 360.0;
  while (d < -180.0) d += 360.0;
  return d;
}

std::vector<Kinematics> kinematics_series(std::span<const GeoPoint> points,
                                          std::span<const std::int64_t> timestamps) {
  if (points.size() != timestamps.size()) {
    throw std::invalid_argument("points/timestamps size mismatch");
  }
  const std::size_t n = points.size();
  std::vector<Kinematics> out(n);
  if (n < 2) return out;

  std::vector<double> speed(n, 0.0), bearing(n, 0.0), hours(n, 0.0);
  bool have_bearing = false;
  for (std::size_t i = 1; i < n; ++i) {
    hours[i] = static_cast<double>(timestamps[i] - timestamps[i - 1]) / 3600.0;
    speed[i] = speed_knots(points[i - 1], points[i], hours[i]);
    if (points[i - 1] == points[i]) {
      bearing[i] = have_bearing ? bearing[i - 1] : 0.0;
    } else {
      bearing[i] = bearing_deg(points[i - 1], points[i]);
      if (!have_bearing) {
        for (std::size_t j = 1; j < i; ++j) bearing[j] = bearing[i];
        have_bearing = true;
      }
    }
  }
  speed[0] = speed[1];
  bearing[0] = bearing[1];

  for (std::size_t i = 0; i < n; ++i) {
    Kinematics& k = out[i];
    k.v = speed[i];
    k.theta = to_gradian(bearing[i]);
    if (i >= 2) {
      k.dv = (speed[i] - speed[i - 1]) / hours[i];
      k.dtheta = delta_bearing(bearing[i - 1], bearing[i]) * (400.0 / 360.0);
    }
  }
  return out;
}

}  // namespace voyagecast::geo
