#include "voyagecast/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace voyagecast::geometry {

namespace {
constexpr double kEps = 1e-12;

int sign(double v) { return (v > kEps) - (v < -kEps); }
}  // namespace

double cross(const GeoPoint& o, const GeoPoint& a, const GeoPoint& b) {
  return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  if (sign(cross(a, b, p)) != 0) return false;
  return p.lon >= std::min(a.lon, b.lon) - kEps && p.lon <= std::max(a.lon, b.lon) + kEps &&
         p.lat >= std::min(a.lat, b.lat) - kEps && p.lat <= std::max(a.lat, b.lat) + kEps;
}

bool segments_intersect(const GeoPoint& a1, const GeoPoint& a2, const GeoPoint& b1,
                        const GeoPoint& b2) {
  const int d1 = sign(cross(b1, b2, a1));
  const int d2 = sign(cross(b1, b2, a2));
  const int d3 = sign(cross(a1, a2, b1));
  const int d4 = sign(cross(a1, a2, b2));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  return (d1 == 0 && on_segment(a1, b1, b2)) || (d2 == 0 && on_segment(a2, b1, b2)) ||
         (d3 == 0 && on_segment(b1, a1, a2)) || (d4 == 0 && on_segment(b2, a1, a2));
}

bool point_in_polygon(std::span<const GeoPoint> ring, const GeoPoint& p) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (on_segment(p, ring[i], ring[(i + 1) % n])) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

double signed_area(std::span<const GeoPoint> ring) {
  double s = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[(i + 1) % n];
    s += a.lon * b.lat - b.lon * a.lat;
  }
  return 0.5 * s;
}

GeoPoint vertex_average(std::span<const GeoPoint> ring) {
  GeoPoint c{0.0, 0.0};
  for (const auto& p : ring) {
    c.lat += p.lat;
    c.lon += p.lon;
  }
  if (!ring.empty()) {
    c.lat /= static_cast<double>(ring.size());
    c.lon /= static_cast<double>(ring.size());
  }
  return c;
}

GeoPoint area_centroid(std::span<const GeoPoint> ring) {
  const double a = signed_area(ring);
  if (std::abs(a) < kEps) return vertex_average(ring);
  double cx = 0.0, cy = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& p = ring[i];
    const GeoPoint& q = ring[(i + 1) % n];
    const double f = p.lon * q.lat - q.lon * p.lat;
    cx += (p.lon + q.lon) * f;
    cy += (p.lat + q.lat) * f;
  }
  return GeoPoint{cy / (6.0 * a), cx / (6.0 * a)};
}

bool is_simple_ring(std::span<const GeoPoint> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n])) return false;
    }
  }
  return true;
}

std::vector<GeoPoint> clip_to_rect(std::span<const GeoPoint> ring, double lat_min, double lat_max,
                                   double lon_min, double lon_max) {
  std::vector<GeoPoint> poly(ring.begin(), ring.end());
  // Each edge: inside test and intersection with the clip line.
  auto clip = [&poly](auto inside, auto intersect) {
    std::vector<GeoPoint> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const GeoPoint& cur = poly[i];
      const GeoPoint& prev = poly[(i + n - 1) % n];
      const bool cin = inside(cur);
      const bool pin = inside(prev);
      if (cin) {
        if (!pin) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pin) {
        out.push_back(intersect(prev, cur));
      }
    }
    poly = std::move(out);
  };
  auto at_lon = [](double lon) {
    return [lon](const GeoPoint& a, const GeoPoint& b) {
      const double t = (lon - a.lon) / (b.lon - a.lon);
      return GeoPoint{a.lat + t * (b.lat - a.lat), lon};
    };
  };
  auto at_lat = [](double lat) {
    return [lat](const GeoPoint& a, const GeoPoint& b) {
      const double t = (lat - a.lat) / (b.lat - a.lat);
      return GeoPoint{lat, a.lon + t * (b.lon - a.lon)};
    };
  };
  clip([&](const GeoPoint& p) { return p.lon >= lon_min; }, at_lon(lon_min));
  if (poly.empty()) return poly;
  clip([&](const GeoPoint& p) { return p.lon <= lon_max; }, at_lon(lon_max));
  if (poly.empty()) return poly;
  clip([&](const GeoPoint& p) { return p.lat >= lat_min; }, at_lat(lat_min));
  if (poly.empty()) return poly;
  clip([&](const GeoPoint& p) { return p.lat <= lat_max; }, at_lat(lat_max));
  return poly;
}

}  // namespace voyagecast::geometry
