#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "voyagecast/features.hpp"
#include "voyagecast/grid.hpp"
#include "voyagecast/ingest.hpp"
#include "voyagecast/nn/model.hpp"
#include "voyagecast/nn/train.hpp"
#include "voyagecast/probmodel.hpp"

namespace voyagecast::pipeline {

/// Raised for invalid configuration values; the CLI maps it to a usage error.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PipelineConfig {
  // Empty paths fall back to the synth outputs inside out_dir.
  std::filesystem::path messages_csv;
  std::filesystem::path ports_csv;
  std::filesystem::path routes_geojson;
  std::filesystem::path out_dir = "voyagecast_run";

  std::optional<grid::BBox> bbox;  // taken from the synth world when unset
  double cell_size_deg = 0.3;

  ingest::PipelineOptions ingest;
  double test_fraction = 0.20;
  double val_fraction = 0.20;

  features::FeatureSet feature_set = features::FeatureSet::Trigonometric;
  double speed_cap_kn = 30.0;
  double accel_cap_kn_per_h = 30.0;
  double log_accel_cap_per_h = 3.0;

  probmodel::StoreOptions store;
  probmodel::EmitOptions emit;

  nn::ModelConfig model;
  nn::TrainConfig train;

  std::size_t synth_vessels = 300;
  std::uint64_t seed = 7;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
};

/// 64-bit FNV-1a digest as 16 hex digits.
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

/// Each stage reads the artifacts of earlier stages from out_dir, checks
/// their manifests, writes its own artifacts plus `manifest_<stage>.json`,
/// and returns a one-line summary. Missing or altered inputs raise
/// std::runtime_error.
std::string run_synth(const PipelineConfig& cfg);
std::string run_grid(const PipelineConfig& cfg);
std::string run_ingest(const PipelineConfig& cfg);
std::string run_fit_prob(const PipelineConfig& cfg);
std::string run_featurize(const PipelineConfig& cfg);
std::string run_train(const PipelineConfig& cfg);
std::string run_predict(const PipelineConfig& cfg);
/// Scores `predictions` (default: out_dir/predictions.csv).
std::string run_evaluate(const PipelineConfig& cfg, const std::filesystem::path& predictions = {});

/// Decode ranges (lat_lo, lat_hi, lon_lo, lon_hi) the pipeline gives the
/// model head: the grid bounding box.
std::array<double, 4> output_ranges(const grid::BBox& bbox);

/// The normalizer and model configuration implied by a pipeline config.
features::Normalizer make_normalizer(const PipelineConfig& cfg, const grid::BBox& bbox);
nn::ModelConfig make_model_config(const PipelineConfig& cfg, const grid::BBox& bbox);

/// Track files carry per-track metadata (weight, end cells, reversal) in a
/// JSON sidecar next to the CSV.
void save_tracks(std::span<const ingest::Track> tracks, const std::filesystem::path& stem);
std::vector<ingest::Track> load_tracks(const std::filesystem::path& stem);

}  // namespace voyagecast::pipeline
