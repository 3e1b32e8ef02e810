#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "voyagecast/pipeline.hpp"

namespace fs = std::filesystem;
using namespace voyagecast;
using pipeline::PipelineConfig;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig tiny_config(const fs::path& out) {
  PipelineConfig c;
  c.out_dir = out;
  c.synth_vessels = 60;
  c.model.filters = {6, 6, 4};
  c.model.lstm_units = 6;
  c.model.dense = {6, 6, 4};
  c.train.max_epochs = 2;
  c.train.samples_per_epoch = 64;
  c.train.batch_size = 16;
  return c;
}

void run_all(const PipelineConfig& c) {
  pipeline::run_synth(c);
  pipeline::run_grid(c);
  pipeline::run_ingest(c);
  pipeline::run_fit_prob(c);
  pipeline::run_featurize(c);
  pipeline::run_train(c);
  pipeline::run_predict(c);
  pipeline::run_evaluate(c);
}

/// Runs the CLI and returns its exit status.
int cli(const std::string& args) {
  const std::string cmd = std::string(VOYAGECAST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("content hash is FNV-1a 64") {
  // Reference digests of the 64-bit FNV-1a function.
  CHECK(pipeline::content_hash("") == "cbf29ce484222325");
  CHECK(pipeline::content_hash("a") == "af63dc4c8601ec8c");
  CHECK(pipeline::content_hash("foobar") == "85944171f73967e8");
}

TEST_CASE("config round-trips through JSON") {
  PipelineConfig c;
  c.bbox = grid::BBox{40.0, 44.0, -70.0, -60.0};
  c.cell_size_deg = 0.25;
  c.feature_set = features::FeatureSet::Probabilistic;
  c.model.ablation = nn::Ablation::C3;
  c.ingest.interpolation = ingest::Interpolation::GreatCircle;
  c.ingest.clean.min_pattern_count = 2;
  c.train.patience = 4;
  c.seed = 99;
  const auto j = c.to_json();
  const auto back = PipelineConfig::from_json(j);
  CHECK(back.to_json() == j);
  REQUIRE(back.bbox);
  CHECK(back.bbox->lon_min == -70.0);
  CHECK(back.model.ablation == nn::Ablation::C3);
  CHECK(back.ingest.interpolation == ingest::Interpolation::GreatCircle);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(PipelineConfig::from_json({{"sed", 3}}), pipeline::ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"train", {{"epochs", 3}}}}), pipeline::ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"grid", {{"cell_size_deg", -1.0}}}}), pipeline::ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"feature_set", "cubic"}}), pipeline::ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"interpolation", "spline"}}), pipeline::ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"split", {{"test_fraction", 1.5}}}}), pipeline::ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"seed", "seven"}}), pipeline::ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"model", {{"ablation", "C9"}}}}), pipeline::ConfigError);
  CHECK_NOTHROW(PipelineConfig::from_json(nlohmann::json::object()));
}

TEST_CASE("model config follows the feature set and grid") {
  PipelineConfig c;
  c.feature_set = features::FeatureSet::Standard;
  const grid::BBox b{46, 50, -66, -58};
  const auto m = pipeline::make_model_config(c, b);
  CHECK(m.input_width == 6);
  CHECK(m.input_rows == 19);
  CHECK(m.output_rows == 72);
  CHECK(m.output_ranges == std::array<double, 4>{46, 50, -66, -58});
  const auto n = pipeline::make_normalizer(c, b);
  CHECK(n.output_ranges == m.output_ranges);
}

TEST_CASE("track files keep per-track metadata") {
  const auto dir = fresh_dir("voyagecast_pipeline_tracks");
  fs::create_directories(dir);
  ingest::Track t;
  t.track_id = 4;
  t.mmsi = 123;
  t.weight = 2.5;
  t.start_cell = 3;
  t.end_cell = 9;
  t.reversed = true;
  for (int i = 0; i < 3; ++i) t.points.push_back({i * 600, {47.0 + 0.01 * i, -60.0}, {}});
  ingest::recompute_kinematics(t);
  const std::vector<ingest::Track> tracks{t};
  pipeline::save_tracks(tracks, dir / "t");
  const auto back = pipeline::load_tracks(dir / "t");
  REQUIRE(back.size() == 1);
  CHECK(back[0].weight == 2.5);
  CHECK(back[0].start_cell == 3);
  CHECK(back[0].end_cell == 9);
  CHECK(back[0].reversed);
  CHECK(back[0].points.size() == 3);
}

TEST_CASE("stages refuse missing or altered upstream artifacts") {
  auto c = tiny_config(fresh_dir("voyagecast_pipeline_guard"));
  CHECK_THROWS_AS(pipeline::run_grid(c), std::runtime_error);
  CHECK_THROWS_AS(pipeline::run_ingest(c), std::runtime_error);
  pipeline::run_synth(c);
  pipeline::run_grid(c);
  CHECK_THROWS_AS(pipeline::run_fit_prob(c), std::runtime_error);
  pipeline::run_ingest(c);
  {
    std::ofstream(c.out_dir / "tracks_train.csv", std::ios::app) << "\n";
  }
  CHECK_THROWS_WITH_AS(pipeline::run_fit_prob(c), doctest::Contains("changed"), std::runtime_error);
  pipeline::run_ingest(c);
  CHECK_NOTHROW(pipeline::run_fit_prob(c));

  // Standard features need no probability store.
  auto s = c;
  s.feature_set = features::FeatureSet::Standard;
  fs::remove(c.out_dir / "manifest_fit-prob.json");
  CHECK_NOTHROW(pipeline::run_featurize(s));
  CHECK_THROWS_AS(pipeline::run_featurize(c), std::runtime_error);

  // Windows of one set cannot feed a model configured for another.
  CHECK_THROWS_WITH_AS(pipeline::run_train(c), doctest::Contains("schema mismatch"), std::runtime_error);
}

TEST_CASE("evaluate rejects malformed prediction files") {
  auto c = tiny_config(fresh_dir("voyagecast_pipeline_eval"));
  fs::create_directories(c.out_dir);
  const auto bad = c.out_dir / "bad.csv";
  std::ofstream(bad) << "a,b\n1,2\n";
  CHECK_THROWS_WITH_AS(pipeline::run_evaluate(c, bad), doctest::Contains("schema mismatch"), std::runtime_error);
  const auto rows = c.out_dir / "rows.csv";
  std::ofstream(rows) << "sample,track_id,mmsi,step,truth_lat,truth_lon,pred_lat,pred_lon\n0,0,1,0,47,-60,x,-60\n";
  CHECK_THROWS_WITH_AS(pipeline::run_evaluate(c, rows), doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_AS(pipeline::run_evaluate(c), std::runtime_error);
}

TEST_CASE("end-to-end run is byte-identical across repeats") {
  const auto a = tiny_config(fresh_dir("voyagecast_pipeline_a"));
  const auto b = tiny_config(fresh_dir("voyagecast_pipeline_b"));
  run_all(a);
  run_all(b);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a.out_dir)) {
    const auto name = entry.path().filename();
    INFO(name.string());
    REQUIRE(fs::exists(b.out_dir / name));
    CHECK(slurp(entry.path()) == slurp(b.out_dir / name));
    ++compared;
  }
  CHECK(compared >= 30);

  const auto geo = nlohmann::json::parse(slurp(a.out_dir / "forecasts.geojson"));
  REQUIRE(!geo.at("features").empty());
  const auto& first = geo.at("features")[0];
  CHECK(first.at("properties").at("kind") == "input");
  CHECK(first.at("properties").at("legend") == "green");
  CHECK(first.at("geometry").at("coordinates").size() == 19);
  CHECK(geo.at("features")[1].at("geometry").at("coordinates").size() == 72);
  CHECK(geo.at("features")[2].at("properties").at("legend") == "red");

  const auto report = nlohmann::json::parse(slurp(a.out_dir / "report.json"));
  CHECK(report.at("mean_km").get<double>() > 0.0);
}

TEST_CASE("cli exit codes") {
  const auto dir = fresh_dir("voyagecast_pipeline_cli");
  const std::string out = " --out " + dir.string();
  CHECK(cli("--help") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("bogus") == 2);
  CHECK(cli("synth --vessels notanumber" + out) == 2);
  CHECK(cli("featurize --feature-set cubic" + out) == 2);
  CHECK(cli("train --ablation C7" + out) == 2);
  CHECK(cli("synth --config /nonexistent/config.json" + out) == 2);
  CHECK(cli("ingest" + out) == 1);
  CHECK(cli("synth --vessels 40" + out) == 0);
  CHECK(cli("grid" + out) == 0);
  CHECK(fs::exists(dir / "grid.geojson"));

  const auto cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"trian": {}})";
  CHECK(cli("grid --config " + cfg.string() + out) == 2);
}
