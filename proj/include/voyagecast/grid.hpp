#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "voyagecast/geo.hpp"

namespace voyagecast::grid {

using geo::GeoPoint;

struct BBox {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  bool contains(const GeoPoint& p) const {
    return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
  }
  GeoPoint center() const { return {(lat_min + lat_max) / 2.0, (lon_min + lon_max) / 2.0}; }
  double area() const { return (lat_max - lat_min) * (lon_max - lon_min); }
};

struct HexCell {
  int id = 0;
  int col = 0;
  int row = 0;
  GeoPoint center;
  std::array<GeoPoint, 6> ring;
};

/// Flat-top hexagonal tiling of a lat/lon box in plain degree space
/// (EPSG:4269 planar). Cells are every hexagon of circumradius
/// `cell_size_deg` whose interior meets the box, numbered row-major.
class HexGrid {
 public:
  HexGrid() = default;

  /// Throws std::invalid_argument for a degenerate box or cell size <= 0.
  static HexGrid build(const BBox& bbox, double cell_size_deg);

  const BBox& bbox() const { return bbox_; }
  double cell_size() const { return cell_size_; }
  std::size_t cell_count() const { return cells_.size(); }
  const std::vector<HexCell>& cells() const { return cells_; }
  const HexCell& cell(int id) const;

  /// Containing cell, lowest id on shared boundaries; nullopt outside bbox.
  std::optional<int> locate(const GeoPoint& p) const;

  /// Vertex average of the hexagon. Throws std::out_of_range for bad ids.
  GeoPoint centroid(int id) const;

  /// Planar area of one hexagon in deg^2.
  double cell_area() const;

 private:
  static std::int64_t key(int col, int row) {
    return (static_cast<std::int64_t>(col) << 32) ^ static_cast<std::uint32_t>(row);
  }
  GeoPoint center_of(int col, int row) const;

  BBox bbox_;
  double cell_size_ = 0.0;
  std::vector<HexCell> cells_;
  std::unordered_map<std::int64_t, int> index_;
};

struct RoutePolygon {
  int id = 0;
  std::vector<GeoPoint> ring;  // open ring
  GeoPoint centroid;
};

/// Validates (>= 3 vertices, simple) and computes the area centroid. A
/// closing vertex equal to the first is dropped.
RoutePolygon make_route(int id, std::vector<GeoPoint> ring);

/// Route containing p; the lowest route id wins on shared boundaries.
std::optional<int> which_route(std::span<const RoutePolygon> routes, const GeoPoint& p);

/// All routes containing p, ascending id.
std::vector<int> routes_containing(std::span<const RoutePolygon> routes, const GeoPoint& p);

const RoutePolygon& route_by_id(std::span<const RoutePolygon> routes, int id);

// GeoJSON FeatureCollections of Polygon features; coordinates are [lon, lat]
// with closed rings. The grid collection also carries `bbox` and
// `cell_size_deg` members so it can be rebuilt exactly.
nlohmann::json to_geojson(const HexGrid& grid);
HexGrid grid_from_geojson(const nlohmann::json& doc);
nlohmann::json to_geojson(std::span<const RoutePolygon> routes);
std::vector<RoutePolygon> routes_from_geojson(const nlohmann::json& doc);

}  // namespace voyagecast::grid
