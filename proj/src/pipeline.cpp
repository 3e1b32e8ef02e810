#include "voyagecast/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "voyagecast/eval.hpp"
#include "voyagecast/synth.hpp"
#include "voyagecast/text.hpp"

namespace voyagecast::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestSchema = "voyagecast.artifact.v1";
constexpr const char* kSplits[] = {"train", "val", "test"};

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown config key '" + std::string(where) + "." + key + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(field);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing artifact " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path out_path(const PipelineConfig& cfg, const std::string& name) { return cfg.out_dir / name; }

/// Hash of the settings that shape artifact contents; the output directory
/// is excluded so relocated runs produce identical manifests.
std::string config_hash(const PipelineConfig& cfg) {
  json j = cfg.to_json();
  j["paths"].erase("out_dir");
  return content_hash(j.dump());
}

void write_manifest(const PipelineConfig& cfg, const std::string& stage, const std::vector<std::string>& outputs) {
  json files = json::object();
  for (const auto& name : outputs) files[name] = file_hash(out_path(cfg, name));
  write_json(out_path(cfg, "manifest_" + stage + ".json"), {{"schema", kManifestSchema},
                                                              {"stage", stage},
                                                              {"config_hash", config_hash(cfg)},
                                                              {"seed", cfg.seed},
                                                              {"outputs", files}});
}

/// Verifies that `stage` ran and its outputs are unchanged since.
void require_stage(const PipelineConfig& cfg, const std::string& stage) {
  const fs::path path = out_path(cfg, "manifest_" + stage + ".json");
  if (!fs::exists(path)) {
    throw std::runtime_error("missing artifact " + path.string() + " (run `" + stage + "` first)");
  }
  const json m = read_json(path);
  if (m.value("schema", "") != kManifestSchema) {
    throw std::runtime_error("schema mismatch in " + path.string() + ": expected " + kManifestSchema);
  }
  for (const auto& [name, hash] : m.at("outputs").items()) {
    const fs::path file = out_path(cfg, name);
    if (!fs::exists(file)) throw std::runtime_error("missing artifact " + file.string());
    if (file_hash(file) != hash.get<std::string>()) {
      throw std::runtime_error("artifact " + file.string() + " changed after `" + stage + "` wrote it");
    }
  }
}

fs::path input_or_default(const fs::path& configured, const PipelineConfig& cfg, const char* fallback) {
  return configured.empty() ? out_path(cfg, fallback) : configured;
}

grid::HexGrid load_grid(const PipelineConfig& cfg) {
  require_stage(cfg, "grid");
  return grid::grid_from_geojson(read_json(out_path(cfg, "grid.geojson")));
}

std::vector<grid::RoutePolygon> load_routes(const PipelineConfig& cfg) {
  const fs::path path = input_or_default(cfg.routes_geojson, cfg, "routes.geojson");
  if (!fs::exists(path)) {
    if (!cfg.routes_geojson.empty()) throw std::runtime_error("missing routes file " + path.string());
    return {};
  }
  return grid::routes_from_geojson(read_json(path));
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

json bbox_json(const grid::BBox& b) {
  return {{"lat_min", b.lat_min}, {"lat_max", b.lat_max}, {"lon_min", b.lon_min}, {"lon_max", b.lon_max}};
}

grid::BBox bbox_from(const json& j) {
  check_keys(j, "bbox", {"lat_min", "lat_max", "lon_min", "lon_max"});
  grid::BBox b;
  read_field(j, "lat_min", b.lat_min);
  read_field(j, "lat_max", b.lat_max);
  read_field(j, "lon_min", b.lon_min);
  read_field(j, "lon_max", b.lon_max);
  return b;
}

}  // namespace

// ------------------------------------------------------------------ config

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(cell_size_deg, "cell_size_deg");
  positive(ingest.segment.gap_hours, "gap_hours");
  positive(ingest.segment.gap_km, "gap_km");
  positive(ingest.turn_limit_gradian, "turn_limit_gradian");
  positive(ingest.clean.port_radius_km, "port_radius_km");
  positive(ingest.clean.same_port_radius_km, "same_port_radius_km");
  if (ingest.clean.min_pattern_count < 0) throw ConfigError("min_pattern_count must be non-negative");
  positive(speed_cap_kn, "speed_cap_kn");
  positive(accel_cap_kn_per_h, "accel_cap_kn_per_h");
  positive(log_accel_cap_per_h, "log_accel_cap_per_h");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in [0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  if (!(store.delta_quantile >= 0.0 && store.delta_quantile <= 1.0)) {
    throw ConfigError("delta_quantile must lie in [0, 1]");
  }
  if (bbox && (bbox->lat_min >= bbox->lat_max || bbox->lon_min >= bbox->lon_max)) {
    throw ConfigError("bbox is empty");
  }
  if (train.batch_size == 0 || train.max_epochs == 0) throw ConfigError("batch_size and max_epochs must be positive");
  if (!(train.adam.lr > 0.0) || train.adam.weight_decay < 0.0) throw ConfigError("invalid optimizer settings");
  if (synth_vessels == 0) throw ConfigError("synth vessels must be positive");
  try {
    nn::ModelConfig m = model;
    m.input_width = features::arity(feature_set);
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json PipelineConfig::to_json() const {
  json grid_j{{"cell_size_deg", cell_size_deg}};
  if (bbox) grid_j["bbox"] = bbox_json(*bbox);
  json model_j = model.to_json();
  return {
      {"paths",
       {{"messages", messages_csv.generic_string()},
        {"ports", ports_csv.generic_string()},
        {"routes", routes_geojson.generic_string()},
        {"out_dir", out_dir.generic_string()}}},
      {"grid", grid_j},
      {"thresholds",
       {{"gap_hours", ingest.segment.gap_hours},
        {"gap_km", ingest.segment.gap_km},
        {"turn_limit_gradian", ingest.turn_limit_gradian},
        {"port_radius_km", ingest.clean.port_radius_km},
        {"same_port_radius_km", ingest.clean.same_port_radius_km},
        {"min_pattern_count", ingest.clean.min_pattern_count}}},
      {"interpolation", ingest.interpolation == ingest::Interpolation::Linear ? "linear" : "great_circle"},
      {"augment_reverse", ingest.augment_reverse},
      {"split", {{"test_fraction", test_fraction}, {"val_fraction", val_fraction}}},
      {"feature_set", std::string(features::to_string(feature_set))},
      {"normalizer",
       {{"speed_cap_kn", speed_cap_kn},
        {"accel_cap_kn_per_h", accel_cap_kn_per_h},
        {"log_accel_cap_per_h", log_accel_cap_per_h}}},
      {"prob", {{"delta_quantile", store.delta_quantile}, {"sticky_routes", emit.sticky_routes}}},
      {"model", model_j},
      {"train",
       {{"max_epochs", train.max_epochs},
        {"batch_size", train.batch_size},
        {"patience", train.patience},
        {"samples_per_epoch", train.samples_per_epoch},
        {"lr", train.adam.lr},
        {"weight_decay", train.adam.weight_decay}}},
      {"synth", {{"vessels", synth_vessels}}},
      {"seed", seed}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  check_keys(j, "config",
             {"paths", "grid", "thresholds", "interpolation", "augment_reverse", "split", "feature_set", "normalizer",
              "prob", "model", "train", "synth", "seed"});
  PipelineConfig c;
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, "paths", {"messages", "ports", "routes", "out_dir"});
    if (p.contains("messages")) c.messages_csv = p.at("messages").get<std::string>();
    if (p.contains("ports")) c.ports_csv = p.at("ports").get<std::string>();
    if (p.contains("routes")) c.routes_geojson = p.at("routes").get<std::string>();
    if (p.contains("out_dir")) c.out_dir = p.at("out_dir").get<std::string>();
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "grid", {"bbox", "cell_size_deg"});
    if (g.contains("bbox")) c.bbox = bbox_from(g.at("bbox"));
    read_field(g, "cell_size_deg", c.cell_size_deg);
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    check_keys(t, "thresholds",
               {"gap_hours", "gap_km", "turn_limit_gradian", "port_radius_km", "same_port_radius_km",
                "min_pattern_count"});
    read_field(t, "gap_hours", c.ingest.segment.gap_hours);
    read_field(t, "gap_km", c.ingest.segment.gap_km);
    read_field(t, "turn_limit_gradian", c.ingest.turn_limit_gradian);
    read_field(t, "port_radius_km", c.ingest.clean.port_radius_km);
    read_field(t, "same_port_radius_km", c.ingest.clean.same_port_radius_km);
    read_field(t, "min_pattern_count", c.ingest.clean.min_pattern_count);
  }
  if (j.contains("interpolation")) {
    const auto mode = j.at("interpolation").get<std::string>();
    if (mode == "linear") {
      c.ingest.interpolation = ingest::Interpolation::Linear;
    } else if (mode == "great_circle") {
      c.ingest.interpolation = ingest::Interpolation::GreatCircle;
    } else {
      throw ConfigError("interpolation must be 'linear' or 'great_circle'");
    }
  }
  read_field(j, "augment_reverse", c.ingest.augment_reverse);
  if (j.contains("split")) {
    check_keys(j.at("split"), "split", {"test_fraction", "val_fraction"});
    read_field(j.at("split"), "test_fraction", c.test_fraction);
    read_field(j.at("split"), "val_fraction", c.val_fraction);
  }
  if (j.contains("feature_set")) {
    try {
      c.feature_set = features::parse_feature_set(j.at("feature_set").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("normalizer")) {
    const auto& n = j.at("normalizer");
    check_keys(n, "normalizer", {"speed_cap_kn", "accel_cap_kn_per_h", "log_accel_cap_per_h"});
    read_field(n, "speed_cap_kn", c.speed_cap_kn);
    read_field(n, "accel_cap_kn_per_h", c.accel_cap_kn_per_h);
    read_field(n, "log_accel_cap_per_h", c.log_accel_cap_per_h);
  }
  if (j.contains("prob")) {
    check_keys(j.at("prob"), "prob", {"delta_quantile", "sticky_routes"});
    read_field(j.at("prob"), "delta_quantile", c.store.delta_quantile);
    read_field(j.at("prob"), "sticky_routes", c.emit.sticky_routes);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model",
               {"ablation", "input_width", "input_rows", "output_rows", "filters", "kernels", "dilation", "pool",
                "bn_eps", "bn_momentum", "dropout", "lstm_units", "omega", "dense", "l2", "output_ranges", "seed"});
    json merged = c.model.to_json();
    for (const auto& [key, value] : m.items()) merged[key] = value;
    try {
      c.model = nn::ModelConfig::from_json(merged);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train", {"max_epochs", "batch_size", "patience", "samples_per_epoch", "lr", "weight_decay"});
    read_field(t, "max_epochs", c.train.max_epochs);
    read_field(t, "batch_size", c.train.batch_size);
    read_field(t, "patience", c.train.patience);
    read_field(t, "samples_per_epoch", c.train.samples_per_epoch);
    read_field(t, "lr", c.train.adam.lr);
    read_field(t, "weight_decay", c.train.adam.weight_decay);
  }
  if (j.contains("synth")) {
    check_keys(j.at("synth"), "synth", {"vessels"});
    read_field(j.at("synth"), "vessels", c.synth_vessels);
  }
  read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  } catch (const json::type_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------------ hashing

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const fs::path& path) { return content_hash(read_file(path)); }

// ------------------------------------------------------------------ helpers

std::array<double, 4> output_ranges(const grid::BBox& b) { return {b.lat_min, b.lat_max, b.lon_min, b.lon_max}; }

features::Normalizer make_normalizer(const PipelineConfig& cfg, const grid::BBox& bbox) {
  features::NormalizerConfig nc;
  nc.bbox = bbox;
  nc.speed_cap_kn = cfg.speed_cap_kn;
  nc.accel_cap_kn_per_h = cfg.accel_cap_kn_per_h;
  nc.log_accel_cap_per_h = cfg.log_accel_cap_per_h;
  nc.output_ranges = output_ranges(bbox);
  return features::fit_normalizer(cfg.feature_set, nc);
}

nn::ModelConfig make_model_config(const PipelineConfig& cfg, const grid::BBox& bbox) {
  nn::ModelConfig m = cfg.model;
  m.input_width = features::arity(cfg.feature_set);
  m.input_rows = features::kInputRows;
  m.output_rows = features::kTargetRows;
  m.output_ranges = output_ranges(bbox);
  m.validate();
  return m;
}

void save_tracks(std::span<const ingest::Track> tracks, const fs::path& stem) {
  std::ostringstream csv;
  ingest::write_tracks_csv(csv, tracks);
  write_text(fs::path(stem.string() + ".csv"), csv.str());
  json meta = json::array();
  for (const auto& t : tracks) {
    meta.push_back({{"track_id", t.track_id},
                    {"weight", t.weight},
                    {"start_cell", t.start_cell},
                    {"end_cell", t.end_cell},
                    {"reversed", t.reversed}});
  }
  write_json(fs::path(stem.string() + ".json"), {{"schema", "tracks.v1"}, {"tracks", meta}});
}

std::vector<ingest::Track> load_tracks(const fs::path& stem) {
  std::istringstream csv(read_file(fs::path(stem.string() + ".csv")));
  auto tracks = ingest::read_tracks_csv(csv);
  const json meta = read_json(fs::path(stem.string() + ".json"));
  if (meta.value("schema", "") != "tracks.v1") throw std::runtime_error("schema mismatch in " + stem.string() + ".json");
  const auto& rows = meta.at("tracks");
  if (rows.size() != tracks.size()) throw std::runtime_error("track metadata does not match " + stem.string() + ".csv");
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& r = rows[i];
    if (r.at("track_id").get<std::int64_t>() != tracks[i].track_id) {
      throw std::runtime_error("track metadata out of order in " + stem.string() + ".json");
    }
    tracks[i].weight = r.at("weight").get<double>();
    tracks[i].start_cell = r.at("start_cell").get<int>();
    tracks[i].end_cell = r.at("end_cell").get<int>();
    tracks[i].reversed = r.at("reversed").get<bool>();
  }
  return tracks;
}

// ------------------------------------------------------------------- stages

std::string run_synth(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  auto world = synth::fork_world(cfg.seed);
  world.vessel_count = cfg.synth_vessels;
  const auto corpus = synth::generate(world);

  std::ostringstream messages, ports, labels;
  ingest::write_csv(messages, corpus.messages);
  ingest::write_ports(ports, world.ports);
  synth::write_labels_csv(labels, corpus.labels);
  write_text(out_path(cfg, "messages.csv"), messages.str());
  write_text(out_path(cfg, "ports.csv"), ports.str());
  write_text(out_path(cfg, "labels.csv"), labels.str());
  write_json(out_path(cfg, "routes.geojson"), grid::to_geojson(world.routes));
  write_json(out_path(cfg, "world.json"),
             {{"schema", "world.v1"}, {"bbox", bbox_json(world.bbox)}, {"cell_size_deg", world.cell_size_deg}});
  write_manifest(cfg, "synth", {"messages.csv", "ports.csv", "labels.csv", "routes.geojson", "world.json"});
  return "synth: " + std::to_string(world.vessel_count) + " vessels, " + std::to_string(corpus.messages.size()) +
         " messages -> " + out_path(cfg, "messages.csv").string();
}

std::string run_grid(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  grid::BBox bbox;
  double cell = cfg.cell_size_deg;
  if (cfg.bbox) {
    bbox = *cfg.bbox;
  } else {
    const fs::path world = out_path(cfg, "world.json");
    if (!fs::exists(world)) throw std::runtime_error("no grid bbox configured and no " + world.string());
    const json w = read_json(world);
    if (w.value("schema", "") != "world.v1") throw std::runtime_error("schema mismatch in " + world.string());
    bbox = bbox_from(w.at("bbox"));
    cell = w.at("cell_size_deg").get<double>();
  }
  const auto g = grid::HexGrid::build(bbox, cell);
  write_json(out_path(cfg, "grid.geojson"), grid::to_geojson(g));
  write_manifest(cfg, "grid", {"grid.geojson"});
  return "grid: " + std::to_string(g.cell_count()) + " cells of " + fmt("%g", cell) + " deg -> " +
         out_path(cfg, "grid.geojson").string();
}

std::string run_ingest(const PipelineConfig& cfg) {
  const auto g = load_grid(cfg);
  const fs::path messages_path = input_or_default(cfg.messages_csv, cfg, "messages.csv");
  if (!fs::exists(messages_path)) throw std::runtime_error("missing artifact " + messages_path.string());
  const auto parsed = ingest::parse_csv(messages_path);
  const fs::path ports_path = input_or_default(cfg.ports_csv, cfg, "ports.csv");
  std::vector<ingest::Port> ports;
  if (fs::exists(ports_path)) {
    ports = ingest::parse_ports(ports_path);
  } else if (!cfg.ports_csv.empty()) {
    throw std::runtime_error("missing ports file " + ports_path.string());
  }

  ingest::PipelineReport report;
  auto tracks = ingest::run_pipeline(parsed.messages, ports, g, cfg.ingest, &report);
  ingest::SplitOptions split;
  split.test_fraction = cfg.test_fraction;
  split.val_fraction_of_rest = cfg.val_fraction;
  split.seed = cfg.seed;
  const auto parts = ingest::stratify_and_split(std::move(tracks), split);

  save_tracks(parts.train, out_path(cfg, "tracks_train"));
  save_tracks(parts.val, out_path(cfg, "tracks_val"));
  save_tracks(parts.test, out_path(cfg, "tracks_test"));
  write_json(out_path(cfg, "ingest.json"), {{"messages", parsed.messages.size()},
                                            {"skipped_rows", parsed.skipped},
                                            {"raw_tracks", report.raw_tracks},
                                            {"port_messages_removed", report.clean.port_messages_removed},
                                            {"too_short", report.clean.too_short},
                                            {"self_intersecting", report.clean.self_intersecting},
                                            {"same_port", report.clean.same_port},
                                            {"outside_grid", report.clean.outside_grid},
                                            {"sparse_pattern", report.clean.sparse_pattern},
                                            {"turn_splits", report.turn_splits},
                                            {"final_tracks", report.final_tracks},
                                            {"train", parts.train.size()},
                                            {"val", parts.val.size()},
                                            {"test", parts.test.size()}});
  std::vector<std::string> outputs{"ingest.json"};
  for (const char* s : kSplits) {
    outputs.push_back(std::string("tracks_") + s + ".csv");
    outputs.push_back(std::string("tracks_") + s + ".json");
  }
  write_manifest(cfg, "ingest", outputs);
  return "ingest: " + std::to_string(parsed.messages.size()) + " messages -> " +
         std::to_string(report.final_tracks) + " tracks (train " + std::to_string(parts.train.size()) + ", val " +
         std::to_string(parts.val.size()) + ", test " + std::to_string(parts.test.size()) + ")";
}

std::string run_fit_prob(const PipelineConfig& cfg) {
  const auto g = load_grid(cfg);
  require_stage(cfg, "ingest");
  const auto train = load_tracks(out_path(cfg, "tracks_train"));
  const auto routes = load_routes(cfg);
  const auto store = probmodel::build_store(train, g, routes, cfg.store);
  store.save(out_path(cfg, "probstore.bin"));
  write_manifest(cfg, "fit-prob", {"probstore.bin"});
  return "fit-prob: " + std::to_string(store.entry_count()) + " entries over " + std::to_string(train.size()) +
         " training tracks, " + std::to_string(routes.size()) + " routes -> " +
         out_path(cfg, "probstore.bin").string();
}

std::string run_featurize(const PipelineConfig& cfg) {
  const auto g = load_grid(cfg);
  require_stage(cfg, "ingest");
  const auto routes = load_routes(cfg);
  std::optional<probmodel::ProbabilityStore> store;
  if (cfg.feature_set != features::FeatureSet::Standard) {
    require_stage(cfg, "fit-prob");
    store = probmodel::ProbabilityStore::load(out_path(cfg, "probstore.bin"));
  }
  features::FeatureContext ctx;
  ctx.store = store ? &*store : nullptr;
  ctx.grid = &g;
  ctx.routes = routes;
  ctx.emit = cfg.emit;

  features::WindowSet ws;
  ws.set = cfg.feature_set;
  ws.normalizer = make_normalizer(cfg, g.bbox());
  std::vector<std::string> outputs;
  std::string counts;
  for (const char* s : kSplits) {
    const auto tracks = load_tracks(out_path(cfg, std::string("tracks_") + s));
    ws.samples = features::build_samples(tracks, cfg.feature_set, ctx, ws.normalizer);
    features::save_windows(ws, out_path(cfg, std::string("windows_") + s));
    outputs.push_back(std::string("windows_") + s + ".bin");
    outputs.push_back(std::string("windows_") + s + ".json");
    counts += (counts.empty() ? "" : ", ") + std::string(s) + " " + std::to_string(ws.samples.size());
  }
  write_manifest(cfg, "featurize", outputs);
  return "featurize: " + std::string(features::to_string(cfg.feature_set)) + " windows (" + counts + ")";
}

namespace {

features::WindowSet load_split(const PipelineConfig& cfg, const char* split) {
  auto ws = features::load_windows(out_path(cfg, std::string("windows_") + split));
  if (ws.set != cfg.feature_set) {
    throw std::runtime_error("schema mismatch: windows_" + std::string(split) + " holds " +
                             std::string(features::to_string(ws.set)) + " features, config asks for " +
                             std::string(features::to_string(cfg.feature_set)));
  }
  return ws;
}

}  // namespace

std::string run_train(const PipelineConfig& cfg) {
  const auto g = load_grid(cfg);
  require_stage(cfg, "featurize");
  const auto tr = load_split(cfg, "train");
  const auto va = load_split(cfg, "val");
  const auto train_set = nn::make_dataset(tr);
  const auto val_set = nn::make_dataset(va);

  nn::ModelConfig mc = make_model_config(cfg, g.bbox());
  mc.output_ranges = tr.normalizer.output_ranges;
  nn::Model model(mc);
  nn::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const auto report = nn::train(model, train_set, val_set, tc);

  nn::save_checkpoint(model, out_path(cfg, "model.bin"));
  std::ostringstream history;
  nn::write_history_csv(history, report.history);
  write_text(out_path(cfg, "history.csv"), history.str());
  write_json(out_path(cfg, "train.json"), {{"ablation", std::string(nn::to_string(mc.ablation))},
                                           {"feature_set", std::string(features::to_string(cfg.feature_set))},
                                           {"parameters", model.parameter_count()},
                                           {"epochs", report.history.size()},
                                           {"best_epoch", report.best_epoch},
                                           {"best_val_loss", report.best_val_loss},
                                           {"train_samples", train_set.size()},
                                           {"val_samples", val_set.size()}});
  write_manifest(cfg, "train", {"model.bin", "history.csv", "train.json"});
  return "train: " + std::string(nn::to_string(mc.ablation)) + " with " + std::to_string(model.parameter_count()) +
         " parameters, " + std::to_string(report.history.size()) + " epochs, best val loss " +
         fmt("%.6f", report.best_val_loss) + " at epoch " + std::to_string(report.best_epoch);
}

std::string run_predict(const PipelineConfig& cfg) {
  require_stage(cfg, "featurize");
  require_stage(cfg, "train");
  const auto model = nn::load_checkpoint(out_path(cfg, "model.bin"));
  const auto ws = load_split(cfg, "test");
  if (model->config().input_width != ws.width()) {
    throw std::runtime_error("schema mismatch: model expects " + std::to_string(model->config().input_width) +
                             " features, windows have " + std::to_string(ws.width()));
  }
  const auto data = nn::make_dataset(ws);
  const nn::Tensor out = ws.samples.empty() ? nn::Tensor({0, features::kTargetRows, 2}) : nn::predict(*model, data.inputs);

  std::string csv = "sample,track_id,mmsi,step,truth_lat,truth_lon,pred_lat,pred_lon\n";
  json features_j = json::array();
  auto line = [](const std::vector<std::array<double, 2>>& latlon) {
    json coords = json::array();
    for (const auto& p : latlon) coords.push_back({p[1], p[0]});
    return json{{"type", "LineString"}, {"coordinates", coords}};
  };
  for (std::size_t s = 0; s < ws.samples.size(); ++s) {
    const auto& w = ws.samples[s];
    std::vector<std::array<double, 2>> input, truth, pred;
    for (const auto& row : w.input) {
      const auto raw = ws.normalizer.invert(row);
      input.push_back({raw[features::kLat], raw[features::kLon]});
    }
    for (std::size_t t = 0; t < features::kTargetRows; ++t) {
      const auto d = model->decode(out.at(s, t, 0), out.at(s, t, 1));
      pred.push_back(d);
      truth.push_back(w.target[t]);
      csv += std::to_string(s) + ',' + std::to_string(w.track_id) + ',' + std::to_string(w.mmsi) + ',' +
             std::to_string(t) + ',' + text::format_double(w.target[t][0]) + ',' +
             text::format_double(w.target[t][1]) + ',' + text::format_double(d[0]) + ',' +
             text::format_double(d[1]) + '\n';
    }
    const std::pair<const char*, const char*> kinds[] = {{"input", "green"}, {"truth", "blue"}, {"prediction", "red"}};
    const std::vector<std::array<double, 2>>* lines[] = {&input, &truth, &pred};
    for (int k = 0; k < 3; ++k) {
      features_j.push_back({{"type", "Feature"},
                            {"geometry", line(*lines[k])},
                            {"properties",
                             {{"sample", s},
                              {"track_id", w.track_id},
                              {"mmsi", w.mmsi},
                              {"start_time", ingest::format_iso8601(w.start_time)},
                              {"kind", kinds[k].first},
                              {"legend", kinds[k].second}}}});
    }
  }
  write_text(out_path(cfg, "predictions.csv"), csv);
  write_text(out_path(cfg, "forecasts.geojson"),
             json{{"type", "FeatureCollection"}, {"features", features_j}}.dump() + "\n");
  write_manifest(cfg, "predict", {"predictions.csv", "forecasts.geojson"});
  return "predict: " + std::to_string(ws.samples.size()) + " forecasts of " + std::to_string(features::kTargetRows) +
         " steps -> " + out_path(cfg, "forecasts.geojson").string();
}

std::string run_evaluate(const PipelineConfig& cfg, const fs::path& predictions) {
  fs::path path = predictions;
  if (path.empty()) {
    require_stage(cfg, "predict");
    path = out_path(cfg, "predictions.csv");
  }
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "sample,track_id,mmsi,step,truth_lat,truth_lon,pred_lat,pred_lon") {
    throw std::runtime_error("schema mismatch: " + path.string() + " is not a predictions file");
  }
  std::vector<eval::Coord> truth, pred;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line);
    std::array<std::optional<double>, 4> v;
    if (cols.size() == 8) {
      for (std::size_t k = 0; k < 4; ++k) v[k] = text::to_double(cols[4 + k]);
    }
    if (!v[0] || !v[1] || !v[2] || !v[3]) {
      throw std::runtime_error("malformed prediction row at line " + std::to_string(lineno) + " of " + path.string());
    }
    truth.push_back({*v[0], *v[1]});
    pred.push_back({*v[2], *v[3]});
  }
  const auto report = eval::haversine_error_report(truth, pred);
  json j = eval::to_json(report);
  j["feature_set"] = std::string(features::to_string(cfg.feature_set));
  j["ablation"] = std::string(nn::to_string(cfg.model.ablation));
  fs::create_directories(cfg.out_dir);
  write_json(out_path(cfg, "report.json"), j);
  const std::string label =
      std::string(nn::to_string(cfg.model.ablation)) + " " + std::string(features::to_string(cfg.feature_set));
  write_text(out_path(cfg, "report.md"), eval::markdown_table({{label, report}}));
  write_manifest(cfg, "evaluate", {"report.json", "report.md"});
  return "evaluate: " + std::to_string(truth.size()) + " points, mean " + fmt("%.3f", report.mean_km) +
         " km, median " + fmt("%.3f", report.p50_km) + " km -> " + out_path(cfg, "report.json").string();
}

}  // namespace voyagecast::pipeline
