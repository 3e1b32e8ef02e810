#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "voyagecast/grid.hpp"
#include "voyagecast/ingest.hpp"

namespace voyagecast::synth {

using geo::GeoPoint;

/// One way out of the shared prefix. `route_id` is the polygon the branch
/// crosses, or -1 when it crosses none.
struct Branch {
  std::vector<GeoPoint> waypoints;  // starts where the prefix ends
  double probability = 1.0;
  int route_id = -1;
};

struct LaneWorld {
  std::uint64_t seed = 7;
  grid::BBox bbox;
  double cell_size_deg = 0.3;
  std::vector<grid::RoutePolygon> routes;
  std::vector<ingest::Port> ports;
  std::vector<GeoPoint> prefix;
  std::vector<Branch> branches;

  std::size_t vessel_count = 3000;
  std::size_t voyages_per_vessel = 1;
  std::uint64_t first_mmsi = 316000000;
  double cargo_fraction = 0.6;

  double speed_min_kn = 10.0;
  double speed_max_kn = 18.0;
  double speed_sigma_kn = 0.3;
  double report_interval_min = 5.0;
  double report_jitter_min = 2.0;

  /// Per-vessel offset of the whole lane, Gaussian, km.
  double lateral_sigma_km = 1.5;
  /// AR(1) cross-track wobble around the vessel's own lane, km.
  double cross_track_sigma_km = 0.3;
  double cross_track_rho = 0.9;
  /// Offsets fade to zero this far from either lane end.
  double taper_km = 15.0;

  std::int64_t epoch = 1609459200;  // 2021-01-01T00:00:00Z
  double departure_spread_days = 60.0;
};

struct Label {
  std::int64_t track_id = 0;  // voyage index
  std::uint64_t mmsi = 0;
  int route_id = -1;
  int dest_cell = -1;
};

struct Corpus {
  std::vector<ingest::AisMessage> messages;
  std::vector<Label> labels;
};

/// Throws std::invalid_argument when branch probabilities do not sum to 1,
/// a lane endpoint falls outside the grid, or the world is otherwise empty.
void validate(const LaneWorld& world);

/// Full lane polyline for a branch (prefix followed by the branch).
std::vector<GeoPoint> lane_polyline(const LaneWorld& world, std::size_t branch);

/// Seeded corpus; vessels are generated in parallel from per-vessel derived
/// seeds so the output does not depend on the thread count.
Corpus generate(const LaneWorld& world);

/// Two lanes from A to C sharing the prefix A->B, then splitting 2/3 north
/// through route 0 and 1/3 south through route 1.
LaneWorld fork_world(std::uint64_t seed = 7);

grid::HexGrid build_grid(const LaneWorld& world);

void write_labels_csv(std::ostream& out, const std::vector<Label>& labels);
std::vector<Label> read_labels_csv(std::istream& in);

}  // namespace voyagecast::synth
