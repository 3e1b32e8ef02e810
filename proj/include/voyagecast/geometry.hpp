#pragma once

// Planar predicates on (lon, lat) degree coordinates. Regional work only:
// no antimeridian handling.

#include <span>
#include <vector>

#include "voyagecast/geo.hpp"

namespace voyagecast::geometry {

using geo::GeoPoint;

double cross(const GeoPoint& o, const GeoPoint& a, const GeoPoint& b);

bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b);

/// True when the closed segments share at least one point.
bool segments_intersect(const GeoPoint& a1, const GeoPoint& a2, const GeoPoint& b1,
                        const GeoPoint& b2);

/// Boundary-inclusive point-in-polygon on an open ring (last vertex is not
/// a repeat of the first).
bool point_in_polygon(std::span<const GeoPoint> ring, const GeoPoint& p);

/// Signed shoelace area in deg^2 (positive for counter-clockwise in lon/lat).
double signed_area(std::span<const GeoPoint> ring);

/// Area centroid; falls back to the vertex average for degenerate rings.
GeoPoint area_centroid(std::span<const GeoPoint> ring);

GeoPoint vertex_average(std::span<const GeoPoint> ring);

/// True when no two non-adjacent edges of the closed ring touch.
bool is_simple_ring(std::span<const GeoPoint> ring);

/// Sutherland-Hodgman clip of a convex or simple ring against an
/// axis-aligned rectangle.
std::vector<GeoPoint> clip_to_rect(std::span<const GeoPoint> ring, double lat_min, double lat_max,
                                   double lon_min, double lon_max);

}  // namespace voyagecast::geometry
