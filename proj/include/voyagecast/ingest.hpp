#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voyagecast/geo.hpp"
#include "voyagecast/grid.hpp"

namespace voyagecast::ingest {

using geo::GeoPoint;

enum class VesselType { Cargo, Tanker, Other };

std::string_view to_string(VesselType t);
/// Accepts "cargo"/"tanker"/"other" (any case) or AIS ship-type codes
/// (70-79 cargo, 80-89 tanker); anything else maps to Other.
VesselType parse_vessel_type(std::string_view s);

struct AisMessage {
  std::uint64_t mmsi = 0;
  std::int64_t timestamp = 0;  // UTC seconds
  GeoPoint pos;
  std::optional<double> sog;  // knots
  std::optional<double> cog;  // degrees
  VesselType vessel_type = VesselType::Other;
};

struct TrackPoint {
  std::int64_t timestamp = 0;
  GeoPoint pos;
  geo::Kinematics kin;
};

struct Track {
  std::int64_t track_id = -1;
  std::uint64_t mmsi = 0;
  VesselType vessel_type = VesselType::Other;
  std::vector<TrackPoint> points;
  int start_cell = -1;
  int end_cell = -1;
  double weight = 1.0;
  bool reversed = false;

  std::int64_t start_time() const { return points.empty() ? 0 : points.front().timestamp; }
};

struct Port {
  std::string name;
  GeoPoint pos;
};

/// Seconds since the Unix epoch from "YYYY-MM-DDTHH:MM:SS[.fff][Z|+00:00]".
/// Throws std::invalid_argument on malformed input.
std::int64_t parse_iso8601(std::string_view s);
std::string format_iso8601(std::int64_t seconds);

struct ParseResult {
  std::vector<AisMessage> messages;
  std::size_t skipped = 0;
};

/// Reads the `mmsi,timestamp_iso8601,lat,lon,sog_knots,cog_deg,vessel_type`
/// schema (extra trailing columns such as track_id are ignored). Invalid rows
/// are counted and skipped; an unreadable file or wrong header throws.
ParseResult parse_csv(const std::filesystem::path& path);
ParseResult parse_csv(std::istream& in);

void write_csv(std::ostream& out, std::span<const AisMessage> messages);

std::vector<Port> parse_ports(const std::filesystem::path& path);
std::vector<Port> parse_ports(std::istream& in);
void write_ports(std::ostream& out, std::span<const Port> ports);

/// Tracks export with the message schema plus `track_id`; sog/cog columns
/// carry the derived speed (knots) and bearing (degrees).
void write_tracks_csv(std::ostream& out, std::span<const Track> tracks);
/// Inverse of write_tracks_csv; kinematics are recomputed.
std::vector<Track> read_tracks_csv(std::istream& in);

struct SegmentOptions {
  double gap_hours = 8.0;
  double gap_km = 50.0;
};

/// Groups by MMSI, sorts by time (duplicate timestamps keep the first row),
/// and starts a new track whenever consecutive messages are more than
/// gap_hours or gap_km apart.
std::vector<Track> segment(std::span<const AisMessage> messages, const SegmentOptions& opts = {});

struct CleanOptions {
  double port_radius_km = 1.0;
  int min_pattern_count = 5;
  double same_port_radius_km = 10.0;
};

struct CleanReport {
  std::size_t port_messages_removed = 0;
  std::size_t too_short = 0;
  std::size_t self_intersecting = 0;
  std::size_t same_port = 0;
  std::size_t outside_grid = 0;
  std::size_t sparse_pattern = 0;
};

bool is_self_intersecting(const Track& track);

/// Drops messages within port_radius_km of a port, then tracks that are
/// shorter than 2 points, self-intersecting, start and end at the same port
/// (same grid cell when no ports are given), start or end outside the grid,
/// or whose (start_cell, end_cell) pattern has <= min_pattern_count members.
/// Surviving tracks get start_cell/end_cell set.
std::vector<Track> clean(std::vector<Track> tracks, std::span<const Port> ports,
                         const grid::HexGrid& grid, const CleanOptions& opts = {},
                         CleanReport* report = nullptr);

enum class Interpolation { Linear, GreatCircle };

inline constexpr std::int64_t kStepSeconds = 600;

/// Resamples onto t0, t0 + 10 min, ... <= t_end. Throws
/// std::invalid_argument for tracks with fewer than 2 points.
Track interpolate_10min(const Track& track, Interpolation mode = Interpolation::Linear);

void recompute_kinematics(Track& track);

/// Cuts between consecutive points whose bearing change exceeds the limit;
/// pieces shorter than 2 points are discarded. Kinematics are recomputed.
std::vector<Track> split_on_turn(const Track& track, double limit_gradian = 45.0);

Track reversed(const Track& track);

/// Each track followed by its time-reversed copy (timestamps remapped so
/// they stay increasing with the original spacing).
std::vector<Track> augment_reverse(std::vector<Track> tracks);

/// Sets start/end cells and balanced weights: total / (patterns * count),
/// so weights sum to the track count. Tracks touching no cell are dropped.
std::vector<Track> assign_strata(std::vector<Track> tracks, const grid::HexGrid& grid);

struct SplitOptions {
  double test_fraction = 0.20;
  double val_fraction_of_rest = 0.20;
  std::uint64_t seed = 0;
};

struct SplitResult {
  std::vector<Track> train;
  std::vector<Track> val;
  std::vector<Track> test;
};

/// Vessel-level stratified split: each MMSI is assigned to its most common
/// pattern, vessels are shuffled per pattern with the seed, and round(f * n)
/// of them go to test (then to validation from the rest). Throws on an
/// empty corpus.
SplitResult stratify_and_split(std::vector<Track> tracks, const SplitOptions& opts = {});

struct PipelineOptions {
  SegmentOptions segment;
  CleanOptions clean;
  Interpolation interpolation = Interpolation::Linear;
  double turn_limit_gradian = 45.0;
  bool augment_reverse = true;
};

struct PipelineReport {
  std::size_t raw_tracks = 0;
  CleanReport clean;
  std::size_t turn_splits = 0;
  std::size_t final_tracks = 0;
};

/// Steps 1-4 end to end. Output is sorted by (mmsi, start time, reversed)
/// and carries dense track ids.
std::vector<Track> run_pipeline(std::span<const AisMessage> messages, std::span<const Port> ports,
                                const grid::HexGrid& grid, const PipelineOptions& opts = {},
                                PipelineReport* report = nullptr);

}  // namespace voyagecast::ingest
