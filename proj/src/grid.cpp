#include "voyagecast/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "voyagecast/geometry.hpp"

namespace voyagecast::grid {

namespace {
const double kSqrt3 = std::sqrt(3.0);
}

GeoPoint HexGrid::center_of(int col, int row) const {
  const double h = kSqrt3 * cell_size_;
  const double lon = bbox_.lon_min + 1.5 * cell_size_ * col;
  const double lat = bbox_.lat_min + h * (row + 0.5 * (col & 1));
  return {lat, lon};
}

HexGrid HexGrid::build(const BBox& bbox, double cell_size_deg) {
  if (!(cell_size_deg > 0.0) || !std::isfinite(cell_size_deg)) {
    throw std::invalid_argument("cell size must be positive");
  }
  if (!(bbox.lat_max > bbox.lat_min) || !(bbox.lon_max > bbox.lon_min)) {
    throw std::invalid_argument("degenerate bounding box");
  }
  HexGrid g;
  g.bbox_ = bbox;
  g.cell_size_ = cell_size_deg;
  const double r = cell_size_deg;
  const double h = kSqrt3 * r;
  const double min_area = 1e-9 * g.cell_area();
  const int max_col = static_cast<int>(std::ceil((bbox.lon_max - bbox.lon_min) / (1.5 * r))) + 1;
  const int max_row = static_cast<int>(std::ceil((bbox.lat_max - bbox.lat_min) / h)) + 1;

  std::vector<HexCell> cells;
  for (int row = -1; row <= max_row; ++row) {
    for (int col = -1; col <= max_col; ++col) {
      HexCell c;
      c.col = col;
      c.row = row;
      c.center = g.center_of(col, row);
      for (int k = 0; k < 6; ++k) {
        const double a = geo::deg2rad(60.0 * k);
        c.ring[k] = {c.center.lat + r * std::sin(a), c.center.lon + r * std::cos(a)};
      }
      const auto clipped = geometry::clip_to_rect(c.ring, bbox.lat_min, bbox.lat_max,
                                                  bbox.lon_min, bbox.lon_max);
      if (clipped.size() < 3 || std::abs(geometry::signed_area(clipped)) <= min_area) continue;
      c.id = static_cast<int>(cells.size());
      cells.push_back(c);
    }
  }
  g.cells_ = std::move(cells);
  for (const auto& c : g.cells_) g.index_.emplace(key(c.col, c.row), c.id);
  return g;
}

const HexCell& HexGrid::cell(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= cells_.size()) {
    throw std::out_of_range("cell id out of range");
  }
  return cells_[static_cast<std::size_t>(id)];
}

double HexGrid::cell_area() const { return 1.5 * kSqrt3 * cell_size_ * cell_size_; }

std::optional<int> HexGrid::locate(const GeoPoint& p) const {
  if (cells_.empty() || !bbox_.contains(p)) return std::nullopt;
  // Fractional axial coordinates, cube rounding, then odd-q offset.
  const double x = (p.lon - bbox_.lon_min) / cell_size_;
  const double y = (p.lat - bbox_.lat_min) / cell_size_;
  const double q = 2.0 / 3.0 * x;
  const double rr = -1.0 / 3.0 * x + kSqrt3 / 3.0 * y;
  const double s = -q - rr;
  double rq = std::round(q), rr2 = std::round(rr), rs = std::round(s);
  const double dq = std::abs(rq - q), dr = std::abs(rr2 - rr), ds = std::abs(rs - s);
  if (dq > dr && dq > ds) {
    rq = -rr2 - rs;
  } else if (dr > ds) {
    rr2 = -rq - rs;
  }
  const int col = static_cast<int>(rq);
  const int ar = static_cast<int>(rr2);
  const int row = ar + (col - (col & 1)) / 2;

  std::optional<int> best;
  for (int dc = -1; dc <= 1; ++dc) {
    for (int drow = -1; drow <= 1; ++drow) {
      const auto it = index_.find(key(col + dc, row + drow));
      if (it == index_.end()) continue;
      const HexCell& c = cells_[static_cast<std::size_t>(it->second)];
      if (geometry::point_in_polygon(c.ring, p) && (!best || c.id < *best)) best = c.id;
    }
  }
  if (best) return best;
  for (const auto& c : cells_) {
    if (geometry::point_in_polygon(c.ring, p)) return c.id;
  }
  return std::nullopt;
}

GeoPoint HexGrid::centroid(int id) const { return geometry::vertex_average(cell(id).ring); }

RoutePolygon make_route(int id, std::vector<GeoPoint> ring) {
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  if (ring.size() < 3) throw std::invalid_argument("route polygon needs at least 3 vertices");
  for (const auto& p : ring) {
    if (!geo::is_valid(p)) throw std::invalid_argument("route polygon vertex out of range");
  }
  if (!geometry::is_simple_ring(ring)) {
    throw std::invalid_argument("route polygon ring is self-intersecting");
  }
  RoutePolygon r;
  r.id = id;
  r.centroid = geometry::area_centroid(ring);
  r.ring = std::move(ring);
  return r;
}

std::vector<int> routes_containing(std::span<const RoutePolygon> routes, const GeoPoint& p) {
  std::vector<int> ids;
  for (const auto& r : routes) {
    if (geometry::point_in_polygon(r.ring, p)) ids.push_back(r.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::optional<int> which_route(std::span<const RoutePolygon> routes, const GeoPoint& p) {
  std::optional<int> best;
  for (const auto& r : routes) {
    if ((!best || r.id < *best) && geometry::point_in_polygon(r.ring, p)) best = r.id;
  }
  return best;
}

const RoutePolygon& route_by_id(std::span<const RoutePolygon> routes, int id) {
  for (const auto& r : routes) {
    if (r.id == id) return r;
  }
  throw std::out_of_range("unknown route id " + std::to_string(id));
}

namespace {

nlohmann::json ring_coords(std::span<const GeoPoint> ring) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& p : ring) coords.push_back({p.lon, p.lat});
  coords.push_back({ring.front().lon, ring.front().lat});
  return nlohmann::json::array({coords});
}

std::vector<GeoPoint> ring_from_coords(const nlohmann::json& geometry) {
  if (geometry.at("type") != "Polygon") throw std::invalid_argument("expected Polygon geometry");
  std::vector<GeoPoint> ring;
  for (const auto& c : geometry.at("coordinates").at(0)) {
    ring.push_back({c.at(1).get<double>(), c.at(0).get<double>()});
  }
  return ring;
}

}  // namespace

nlohmann::json to_geojson(const HexGrid& grid) {
  nlohmann::json doc;
  doc["type"] = "FeatureCollection";
  const BBox& b = grid.bbox();
  doc["bbox"] = {b.lon_min, b.lat_min, b.lon_max, b.lat_max};
  doc["cell_size_deg"] = grid.cell_size();
  nlohmann::json features = nlohmann::json::array();
  for (const auto& c : grid.cells()) {
    const GeoPoint cen = grid.centroid(c.id);
    features.push_back({{"type", "Feature"},
                        {"properties", {{"cell_id", c.id}, {"centroid", {cen.lon, cen.lat}}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", ring_coords(c.ring)}}}});
  }
  doc["features"] = std::move(features);
  return doc;
}

HexGrid grid_from_geojson(const nlohmann::json& doc) {
  if (!doc.contains("bbox") || !doc.contains("cell_size_deg")) {
    throw std::invalid_argument("grid GeoJSON lacks bbox/cell_size_deg members");
  }
  const auto& bb = doc.at("bbox");
  BBox b{bb.at(1).get<double>(), bb.at(3).get<double>(), bb.at(0).get<double>(),
         bb.at(2).get<double>()};
  HexGrid g = HexGrid::build(b, doc.at("cell_size_deg").get<double>());
  if (doc.contains("features") && doc.at("features").size() != g.cell_count()) {
    throw std::invalid_argument("grid GeoJSON cell count does not match its parameters");
  }
  return g;
}

nlohmann::json to_geojson(std::span<const RoutePolygon> routes) {
  nlohmann::json doc;
  doc["type"] = "FeatureCollection";
  nlohmann::json features = nlohmann::json::array();
  for (const auto& r : routes) {
    features.push_back({{"type", "Feature"},
                        {"properties", {{"route_id", r.id}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", ring_coords(r.ring)}}}});
  }
  doc["features"] = std::move(features);
  return doc;
}

std::vector<RoutePolygon> routes_from_geojson(const nlohmann::json& doc) {
  std::vector<RoutePolygon> routes;
  for (const auto& f : doc.at("features")) {
    routes.push_back(make_route(f.at("properties").at("route_id").get<int>(),
                                ring_from_coords(f.at("geometry"))));
  }
  std::sort(routes.begin(), routes.end(),
            [](const RoutePolygon& a, const RoutePolygon& b) { return a.id < b.id; });
  return routes;
}

}  // namespace voyagecast::grid
