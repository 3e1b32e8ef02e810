#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "voyagecast/geometry.hpp"
#include "voyagecast/grid.hpp"
#include "voyagecast/rng.hpp"

using namespace voyagecast;
using geo::GeoPoint;
using grid::BBox;
using grid::HexGrid;

namespace {

const BBox kGulf{45.0, 52.0, -70.0, -56.0};

// Brute force: the lowest-id cell whose closed hexagon contains p.
std::optional<int> scan_locate(const HexGrid& g, const GeoPoint& p) {
  if (!g.bbox().contains(p)) return std::nullopt;
  for (const auto& c : g.cells()) {
    if (geometry::point_in_polygon(c.ring, p)) return c.id;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("grid build validates arguments") {
  CHECK_THROWS_AS(HexGrid::build(kGulf, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(HexGrid::build(kGulf, -0.3), std::invalid_argument);
  CHECK_THROWS_AS(HexGrid::build({45, 45, -70, -56}, 0.3), std::invalid_argument);
}

TEST_CASE("grid cells are regular hexagons that tile the bbox") {
  const HexGrid g = HexGrid::build(kGulf, 0.3);
  REQUIRE(g.cell_count() > 0);
  double clipped_total = 0.0;
  for (const auto& c : g.cells()) {
    for (int k = 0; k < 6; ++k) {
      const GeoPoint& a = c.ring[k];
      const GeoPoint& b = c.ring[(k + 1) % 6];
      CHECK(std::hypot(a.lat - b.lat, a.lon - b.lon) == doctest::Approx(0.3));
      CHECK(std::hypot(a.lat - c.center.lat, a.lon - c.center.lon) == doctest::Approx(0.3));
    }
    CHECK(std::abs(geometry::signed_area(c.ring)) == doctest::Approx(g.cell_area()));
    clipped_total += std::abs(geometry::signed_area(
        geometry::clip_to_rect(c.ring, kGulf.lat_min, kGulf.lat_max, kGulf.lon_min, kGulf.lon_max)));
  }
  CHECK(clipped_total == doctest::Approx(kGulf.area()).epsilon(1e-9));
}

TEST_CASE("cell ids are dense and row-major") {
  const HexGrid g = HexGrid::build(kGulf, 0.3);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    CHECK(g.cells()[i].id == static_cast<int>(i));
    if (i > 0) {
      const auto& a = g.cells()[i - 1];
      const auto& b = g.cells()[i];
      CHECK((a.row < b.row || (a.row == b.row && a.col < b.col)));
    }
  }
  CHECK_THROWS_AS(g.cell(-1), std::out_of_range);
  CHECK_THROWS_AS(g.cell(static_cast<int>(g.cell_count())), std::out_of_range);
}

TEST_CASE("locate agrees with a brute-force scan") {
  const HexGrid g = HexGrid::build(kGulf, 0.3);
  Rng rng(17);
  for (int i = 0; i < 3000; ++i) {
    const GeoPoint p{rng.uniform(kGulf.lat_min, kGulf.lat_max), rng.uniform(kGulf.lon_min, kGulf.lon_max)};
    const auto got = g.locate(p);
    REQUIRE(got.has_value());
    CHECK(got == scan_locate(g, p));
  }
  // Every vertex is shared by several cells; the lowest id must win.
  for (std::size_t i = 0; i < g.cell_count(); i += 7) {
    for (const auto& v : g.cells()[i].ring) {
      if (!kGulf.contains(v)) continue;
      CHECK(g.locate(v) == scan_locate(g, v));
    }
  }
  CHECK_FALSE(g.locate({44.0, -60.0}).has_value());
  CHECK_FALSE(g.locate({48.0, -80.0}).has_value());
}

TEST_CASE("centroid of each cell locates back to that cell") {
  const HexGrid g = HexGrid::build(kGulf, 0.3);
  for (const auto& c : g.cells()) {
    const GeoPoint cen = g.centroid(c.id);
    CHECK(cen.lat == doctest::Approx(c.center.lat));
    CHECK(cen.lon == doctest::Approx(c.center.lon));
    if (kGulf.contains(cen)) CHECK(g.locate(cen) == c.id);
  }
  CHECK_THROWS_AS(g.centroid(100000), std::out_of_range);
}

TEST_CASE("gulf-sized grid has a few hundred cells") {
  const HexGrid g = HexGrid::build(kGulf, 0.3);
  CHECK(g.cell_count() > 250);
  CHECK(g.cell_count() < 600);
}

TEST_CASE("route polygons") {
  const auto r1 = grid::make_route(1, {{47, -62}, {47, -61}, {48, -61}, {48, -62}, {47, -62}});
  CHECK(r1.ring.size() == 4);
  CHECK(r1.centroid.lat == doctest::Approx(47.5));
  CHECK(r1.centroid.lon == doctest::Approx(-61.5));
  const auto r0 = grid::make_route(0, {{47.5, -61.5}, {47.5, -60.5}, {48.5, -60.5}, {48.5, -61.5}});
  const std::vector<grid::RoutePolygon> routes{r1, r0};
  CHECK(grid::which_route(routes, {47.2, -61.8}) == 1);
  CHECK(grid::which_route(routes, {47.7, -61.2}) == 0);
  CHECK(grid::which_route(routes, {47.7, -61.5}) == 0);
  CHECK_FALSE(grid::which_route(routes, {40, -61}).has_value());
  CHECK(grid::routes_containing(routes, {47.7, -61.2}) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(grid::make_route(2, {{47, -62}, {48, -61}}), std::invalid_argument);
  CHECK_THROWS_AS(grid::make_route(2, {{47, -62}, {48, -61}, {47, -61}, {48, -62}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(grid::route_by_id(routes, 9), std::out_of_range);
}

TEST_CASE("grid and routes round-trip through GeoJSON") {
  const HexGrid g = HexGrid::build(kGulf, 0.3);
  const nlohmann::json doc = grid::to_geojson(g);
  CHECK(doc["features"].size() == g.cell_count());
  const HexGrid back = grid::grid_from_geojson(nlohmann::json::parse(doc.dump()));
  CHECK(back.cell_count() == g.cell_count());
  CHECK(back.cell(17).center == g.cell(17).center);

  nlohmann::json bad = doc;
  bad["features"].erase(0);
  CHECK_THROWS_AS(grid::grid_from_geojson(bad), std::invalid_argument);

  const std::vector<grid::RoutePolygon> routes{
      grid::make_route(3, {{47, -62}, {47, -61}, {48, -61}}),
      grid::make_route(1, {{46, -62}, {46, -61}, {47, -61}})};
  const auto rb = grid::routes_from_geojson(grid::to_geojson(routes));
  REQUIRE(rb.size() == 2);
  CHECK(rb[0].id == 1);
  CHECK(rb[1].ring == routes[0].ring);
}
