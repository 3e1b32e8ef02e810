#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "voyagecast/grid.hpp"
#include "voyagecast/ingest.hpp"
#include "voyagecast/probmodel.hpp"

namespace voyagecast::features {

enum class FeatureSet { Standard, Probabilistic, Trigonometric };

std::string_view to_string(FeatureSet s);
/// Accepts "standard", "probabilistic" and "trigonometric". Throws
/// std::invalid_argument otherwise.
FeatureSet parse_feature_set(std::string_view s);

/// Row width: 6, 12 or 30.
std::size_t arity(FeatureSet s);
const std::vector<std::string>& feature_names(FeatureSet s);

using FeatureRow = std::vector<double>;

/// Column positions shared by every feature set.
inline constexpr std::size_t kLon = 0;
inline constexpr std::size_t kLat = 1;

/// (lon, lat, v, dv, theta, dtheta) per point. Throws std::invalid_argument
/// for tracks with fewer than 2 points.
std::vector<FeatureRow> standard_features(const ingest::Track& track);

/// Standard rows extended with the (lon, lat) of L^R, L^N and L^D.
std::vector<FeatureRow> probabilistic_features(const ingest::Track& track,
                                               std::span<const probmodel::ProbFeatures> prob);

/// Unit-sphere coordinates (alpha, beta, gamma) of a position in degrees.
std::array<double, 3> unit_sphere(double lat_deg, double lon_deg);

/// Expands a 12-wide probabilistic row into the 30-wide trigonometric row.
/// `prev_log_speed` is log(1 + |v|) of the previous message and `dt_hours`
/// the time since it; dv' is their rate of change (0 when dt_hours is 0).
FeatureRow trig_features(const FeatureRow& row, double prev_log_speed, double dt_hours);

/// Feature rows of a whole track. The probabilistic and trigonometric sets
/// need a store, routes and grid to score each message.
struct FeatureContext {
  const probmodel::ProbabilityStore* store = nullptr;
  const grid::HexGrid* grid = nullptr;
  std::span<const grid::RoutePolygon> routes;
  probmodel::EmitOptions emit;
};

std::vector<FeatureRow> track_features(const ingest::Track& track, FeatureSet set, const FeatureContext& ctx = {});

struct NormalizerConfig {
  grid::BBox bbox;
  double speed_cap_kn = 30.0;
  double accel_cap_kn_per_h = 30.0;  // |dv| range
  double log_accel_cap_per_h = 3.0;  // |dv'| range
  /// Decode ranges for the output head: (lat_lo, lat_hi, lon_lo, lon_hi).
  std::array<double, 4> output_ranges{-68.0, 45.0, -58.0, 50.0};
};

/// Per-feature affine map to [0, 1] (clamped), plus the lat/lon decode ranges.
struct Normalizer {
  FeatureSet set = FeatureSet::Standard;
  std::vector<double> lo;
  std::vector<double> hi;
  std::array<double, 4> output_ranges{};

  FeatureRow apply(const FeatureRow& row) const;
  FeatureRow invert(const FeatureRow& row) const;

  /// Target coordinates mapped into [0, 1] by the decode ranges.
  double normalize_lat(double lat) const;
  double normalize_lon(double lon) const;
  double decode_lat(double u) const;
  double decode_lon(double u) const;

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

/// Throws std::invalid_argument when a feature range or decode range is empty.
Normalizer fit_normalizer(FeatureSet set, const NormalizerConfig& cfg);

inline constexpr std::size_t kInputRows = 19;
inline constexpr std::size_t kTargetRows = 72;
inline constexpr std::size_t kStrideRows = 3;  // 30 min at 10-min spacing

struct WindowSample {
  std::vector<FeatureRow> input;                  // kInputRows rows
  std::vector<std::array<double, 2>> target;      // kTargetRows (lat, lon) in degrees
  double weight = 1.0;
  std::uint64_t mmsi = 0;
  std::int64_t track_id = -1;
  std::int64_t start_time = 0;  // timestamp of the input's last row
  std::int64_t origin = 0;      // row index of the input's last row
};

/// Cuts samples whose input ends at rows 0, 3, 6, ... as long as a full
/// 12 h (72 steps) of rows follows. The target starts at the input's last
/// row, and short inputs are left-padded by repeating the earliest row.
/// `rows` and `track.points` must align one to one.
std::vector<WindowSample> sliding_windows(const ingest::Track& track, std::span<const FeatureRow> rows);

/// Normalizes every input row in place.
void normalize_samples(std::vector<WindowSample>& samples, const Normalizer& norm);

/// Feature rows, normalization and windows for a set of tracks, in track
/// order. Runs in parallel per track.
std::vector<WindowSample> build_samples(std::span<const ingest::Track> tracks, FeatureSet set,
                                        const FeatureContext& ctx, const Normalizer& norm);

struct WindowSet {
  FeatureSet set = FeatureSet::Standard;
  Normalizer normalizer;
  std::vector<WindowSample> samples;

  std::size_t width() const { return arity(set); }
};

/// `<stem>.bin` holds the raw tensors, `<stem>.json` the shapes, feature
/// names and normalizer constants.
void save_windows(const WindowSet& ws, const std::filesystem::path& stem);
WindowSet load_windows(const std::filesystem::path& stem);
void write_windows_csv(std::ostream& out, const WindowSet& ws);

}  // namespace voyagecast::features
