#include "voyagecast/features.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "voyagecast/parallel.hpp"
#include "voyagecast/text.hpp"

namespace voyagecast::features {

namespace {

constexpr char kBinMagic[] = "windows.v1";
constexpr std::size_t kBinMagicLen = sizeof(kBinMagic) - 1;

const std::vector<std::string> kStandard{"lon", "lat", "v", "dv", "theta", "dtheta"};

const std::vector<std::string> kProbabilistic{"lon",   "lat",   "v",     "dv",    "theta", "dtheta",
                                              "lon_r", "lat_r", "lon_n", "lat_n", "lon_d", "lat_d"};

const std::vector<std::string> kTrigonometric{
    "lon",   "lat",   "alpha",   "beta",   "gamma",   "v",       "dv",      "theta",   "dtheta",   "log_v",
    "dlog_v", "cos_theta", "sin_theta", "cos_dtheta", "sin_dtheta", "lon_r", "lat_r", "alpha_r", "beta_r",
    "gamma_r", "lon_n", "lat_n", "alpha_n", "beta_n", "gamma_n", "lon_d", "lat_d", "alpha_d", "beta_d",
    "gamma_d"};

double grad_to_rad(double g) { return g * geo::kPi / 200.0; }

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated window file");
  return v;
}

/// Range of one named feature.
std::pair<double, double> feature_range(const std::string& name, const NormalizerConfig& cfg) {
  const std::string base = name.substr(0, name.find('_') == std::string::npos ? name.size() : name.find('_'));
  if (name.rfind("lon", 0) == 0) return {cfg.bbox.lon_min, cfg.bbox.lon_max};
  if (name.rfind("lat", 0) == 0) return {cfg.bbox.lat_min, cfg.bbox.lat_max};
  if (base == "alpha" || base == "beta" || base == "gamma" || base == "cos" || base == "sin") return {-1.0, 1.0};
  if (name == "v") return {0.0, cfg.speed_cap_kn};
  if (name == "dv") return {-cfg.accel_cap_kn_per_h, cfg.accel_cap_kn_per_h};
  if (name == "theta") return {0.0, 400.0};
  if (name == "dtheta") return {-200.0, 200.0};
  if (name == "log_v") return {0.0, std::log1p(cfg.speed_cap_kn)};
  if (name == "dlog_v") return {-cfg.log_accel_cap_per_h, cfg.log_accel_cap_per_h};
  throw std::logic_error("no range for feature " + name);
}

void check_row(const FeatureRow& row, std::size_t width) {
  if (row.size() != width) {
    throw std::invalid_argument("feature row has " + std::to_string(row.size()) + " values, expected " +
                                std::to_string(width));
  }
}

}  // namespace

std::string_view to_string(FeatureSet s) {
  switch (s) {
    case FeatureSet::Standard:
      return "standard";
    case FeatureSet::Probabilistic:
      return "probabilistic";
    case FeatureSet::Trigonometric:
      return "trigonometric";
  }
  return "standard";
}

FeatureSet parse_feature_set(std::string_view s) {
  if (s == "standard") return FeatureSet::Standard;
  if (s == "probabilistic") return FeatureSet::Probabilistic;
  if (s == "trigonometric") return FeatureSet::Trigonometric;
  throw std::invalid_argument("unknown feature set '" + std::string(s) + "'");
}

const std::vector<std::string>& feature_names(FeatureSet s) {
  switch (s) {
    case FeatureSet::Standard:
      return kStandard;
    case FeatureSet::Probabilistic:
      return kProbabilistic;
    case FeatureSet::Trigonometric:
      return kTrigonometric;
  }
  return kStandard;
}

std::size_t arity(FeatureSet s) { return feature_names(s).size(); }

std::vector<FeatureRow> standard_features(const ingest::Track& track) {
  if (track.points.size() < 2) throw std::invalid_argument("feature rows need at least 2 points");
  std::vector<FeatureRow> rows;
  rows.reserve(track.points.size());
  for (const auto& p : track.points) {
    rows.push_back({p.pos.lon, p.pos.lat, p.kin.v, p.kin.dv, p.kin.theta, p.kin.dtheta});
  }
  return rows;
}

std::vector<FeatureRow> probabilistic_features(const ingest::Track& track,
                                               std::span<const probmodel::ProbFeatures> prob) {
  if (prob.size() != track.points.size()) {
    throw std::invalid_argument("probabilistic rows do not match the track length");
  }
  auto rows = standard_features(track);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = prob[i];
    rows[i].insert(rows[i].end(), {f.route.lon, f.route.lat, f.cell.lon, f.cell.lat, f.dest.lon, f.dest.lat});
  }
  return rows;
}

std::array<double, 3> unit_sphere(double lat_deg, double lon_deg) {
  const double la = geo::deg2rad(lat_deg), lo = geo::deg2rad(lon_deg);
  return {std::cos(lo) * std::cos(la), std::sin(lo) * std::cos(la), std::sin(la)};
}

FeatureRow trig_features(const FeatureRow& row, double prev_log_speed, double dt_hours) {
  check_row(row, kProbabilistic.size());
  FeatureRow out;
  out.reserve(kTrigonometric.size());
  auto coords = [&](std::size_t lon_at) {
    const double lon = row[lon_at], lat = row[lon_at + 1];
    const auto s = unit_sphere(lat, lon);
    out.insert(out.end(), {lon, lat, s[0], s[1], s[2]});
  };
  coords(0);
  const double v = row[2], dv = row[3], theta = row[4], dtheta = row[5];
  const double log_v = std::log1p(std::abs(v));
  const double dlog_v = dt_hours > 0.0 ? (log_v - prev_log_speed) / dt_hours : 0.0;
  out.insert(out.end(), {v, dv, theta, dtheta, log_v, dlog_v, std::cos(grad_to_rad(theta)),
                         std::sin(grad_to_rad(theta)), std::cos(grad_to_rad(dtheta)), std::sin(grad_to_rad(dtheta))});
  coords(6);
  coords(8);
  coords(10);
  return out;
}

std::vector<FeatureRow> track_features(const ingest::Track& track, FeatureSet set, const FeatureContext& ctx) {
  if (set == FeatureSet::Standard) return standard_features(track);
  if (!ctx.store || !ctx.grid) throw std::invalid_argument("probabilistic features need a store and a grid");
  const auto prob = probmodel::emit_probabilistic_features(*ctx.store, *ctx.grid, ctx.routes, track, ctx.emit);
  auto rows = probabilistic_features(track, prob);
  if (set == FeatureSet::Probabilistic) return rows;
  std::vector<FeatureRow> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0) {
      out.push_back(trig_features(rows[i], std::log1p(std::abs(rows[i][2])), 0.0));
    } else {
      const double dt = static_cast<double>(track.points[i].timestamp - track.points[i - 1].timestamp) / 3600.0;
      out.push_back(trig_features(rows[i], std::log1p(std::abs(rows[i - 1][2])), dt));
    }
  }
  return out;
}

FeatureRow Normalizer::apply(const FeatureRow& row) const {
  check_row(row, lo.size());
  FeatureRow out(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) out[k] = std::clamp((row[k] - lo[k]) / (hi[k] - lo[k]), 0.0, 1.0);
  return out;
}

FeatureRow Normalizer::invert(const FeatureRow& row) const {
  check_row(row, lo.size());
  FeatureRow out(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) out[k] = lo[k] + row[k] * (hi[k] - lo[k]);
  return out;
}

double Normalizer::normalize_lat(double lat) const {
  return (lat - output_ranges[0]) / (output_ranges[1] - output_ranges[0]);
}
double Normalizer::normalize_lon(double lon) const {
  return (lon - output_ranges[2]) / (output_ranges[3] - output_ranges[2]);
}
double Normalizer::decode_lat(double u) const { return output_ranges[0] + u * (output_ranges[1] - output_ranges[0]); }
double Normalizer::decode_lon(double u) const { return output_ranges[2] + u * (output_ranges[3] - output_ranges[2]); }

nlohmann::json Normalizer::to_json() const {
  return {{"feature_set", std::string(to_string(set))},
          {"names", feature_names(set)},
          {"lo", lo},
          {"hi", hi},
          {"output_ranges", output_ranges}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  Normalizer n;
  n.set = parse_feature_set(j.at("feature_set").get<std::string>());
  n.lo = j.at("lo").get<std::vector<double>>();
  n.hi = j.at("hi").get<std::vector<double>>();
  n.output_ranges = j.at("output_ranges").get<std::array<double, 4>>();
  if (n.lo.size() != arity(n.set) || n.hi.size() != arity(n.set)) {
    throw std::runtime_error("normalizer width does not match its feature set");
  }
  return n;
}

Normalizer fit_normalizer(FeatureSet set, const NormalizerConfig& cfg) {
  Normalizer n;
  n.set = set;
  for (const auto& name : feature_names(set)) {
    const auto [lo, hi] = feature_range(name, cfg);
    if (!(hi > lo)) throw std::invalid_argument("empty normalization range for " + name);
    n.lo.push_back(lo);
    n.hi.push_back(hi);
  }
  n.output_ranges = cfg.output_ranges;
  if (!(n.output_ranges[1] > n.output_ranges[0]) || !(n.output_ranges[3] > n.output_ranges[2])) {
    throw std::invalid_argument("empty output decode range");
  }
  return n;
}

std::vector<WindowSample> sliding_windows(const ingest::Track& track, std::span<const FeatureRow> rows) {
  if (rows.size() != track.points.size()) throw std::invalid_argument("feature rows do not match the track");
  std::vector<WindowSample> out;
  const std::size_t n = rows.size();
  for (std::size_t end = 0; end + kTargetRows < n; end += kStrideRows) {
    WindowSample s;
    const std::size_t first = end + 1 >= kInputRows ? end + 1 - kInputRows : 0;
    const std::size_t pad = kInputRows - (end + 1 - first);
    s.input.assign(pad, rows[first]);
    s.input.insert(s.input.end(), rows.begin() + static_cast<std::ptrdiff_t>(first),
                   rows.begin() + static_cast<std::ptrdiff_t>(end) + 1);
    for (std::size_t k = end; k < end + kTargetRows; ++k) {
      s.target.push_back({track.points[k].pos.lat, track.points[k].pos.lon});
    }
    s.weight = track.weight;
    s.mmsi = track.mmsi;
    s.track_id = track.track_id;
    s.start_time = track.points[end].timestamp;
    s.origin = static_cast<std::int64_t>(end);
    out.push_back(std::move(s));
  }
  return out;
}

void normalize_samples(std::vector<WindowSample>& samples, const Normalizer& norm) {
  for (auto& s : samples) {
    for (auto& r : s.input) r = norm.apply(r);
  }
}

std::vector<WindowSample> build_samples(std::span<const ingest::Track> tracks, FeatureSet set,
                                        const FeatureContext& ctx, const Normalizer& norm) {
  if (norm.set != set) throw std::invalid_argument("normalizer was fitted for another feature set");
  std::vector<std::vector<WindowSample>> per_track(tracks.size());
  parallel_for(tracks.size(), [&](std::size_t t) {
    if (tracks[t].points.size() <= kTargetRows) return;
    const auto rows = track_features(tracks[t], set, ctx);
    per_track[t] = sliding_windows(tracks[t], rows);
    normalize_samples(per_track[t], norm);
  });
  std::vector<WindowSample> out;
  for (auto& v : per_track) {
    for (auto& s : v) out.push_back(std::move(s));
  }
  return out;
}

void save_windows(const WindowSet& ws, const std::filesystem::path& stem) {
  const std::size_t width = ws.width();
  auto bin_path = stem;
  bin_path += ".bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());
  bin.write(kBinMagic, kBinMagicLen);
  put<std::uint64_t>(bin, ws.samples.size());
  put<std::uint64_t>(bin, width);
  for (const auto& s : ws.samples) {
    if (s.input.size() != kInputRows || s.target.size() != kTargetRows) {
      throw std::invalid_argument("window sample has the wrong shape");
    }
    put<double>(bin, s.weight);
    put<std::uint64_t>(bin, s.mmsi);
    put<std::int64_t>(bin, s.track_id);
    put<std::int64_t>(bin, s.start_time);
    put<std::int64_t>(bin, s.origin);
    for (const auto& r : s.input) {
      check_row(r, width);
      for (double v : r) put<double>(bin, v);
    }
    for (const auto& t : s.target) {
      put<double>(bin, t[0]);
      put<double>(bin, t[1]);
    }
  }
  if (!bin) throw std::runtime_error("failed writing " + bin_path.string());

  nlohmann::json meta{{"schema", "windows.v1"},
                      {"feature_set", std::string(to_string(ws.set))},
                      {"features", feature_names(ws.set)},
                      {"count", ws.samples.size()},
                      {"input_shape", {ws.samples.size(), kInputRows, width}},
                      {"target_shape", {ws.samples.size(), kTargetRows, 2}},
                      {"normalizer", ws.normalizer.to_json()}};
  auto json_path = stem;
  json_path += ".json";
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  js << meta.dump(2) << '\n';
}

WindowSet load_windows(const std::filesystem::path& stem) {
  auto json_path = stem;
  json_path += ".json";
  std::ifstream js(json_path);
  if (!js) throw std::runtime_error("cannot open " + json_path.string());
  const auto meta = nlohmann::json::parse(js);
  if (meta.value("schema", "") != "windows.v1") throw std::runtime_error("window schema version mismatch");
  WindowSet ws;
  ws.set = parse_feature_set(meta.at("feature_set").get<std::string>());
  ws.normalizer = Normalizer::from_json(meta.at("normalizer"));

  auto bin_path = stem;
  bin_path += ".bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + bin_path.string());
  char magic[kBinMagicLen];
  bin.read(magic, kBinMagicLen);
  if (!bin || std::string_view(magic, kBinMagicLen) != std::string_view(kBinMagic, kBinMagicLen)) {
    throw std::runtime_error("window file schema version mismatch");
  }
  const auto count = get<std::uint64_t>(bin);
  const auto width = get<std::uint64_t>(bin);
  if (width != ws.width() || count != meta.at("count").get<std::uint64_t>()) {
    throw std::runtime_error("window file does not match its sidecar");
  }
  ws.samples.resize(count);
  for (auto& s : ws.samples) {
    s.weight = get<double>(bin);
    s.mmsi = get<std::uint64_t>(bin);
    s.track_id = get<std::int64_t>(bin);
    s.start_time = get<std::int64_t>(bin);
    s.origin = get<std::int64_t>(bin);
    s.input.assign(kInputRows, FeatureRow(width));
    for (auto& r : s.input) {
      for (auto& v : r) v = get<double>(bin);
    }
    s.target.resize(kTargetRows);
    for (auto& t : s.target) {
      t[0] = get<double>(bin);
      t[1] = get<double>(bin);
    }
  }
  return ws;
}

void write_windows_csv(std::ostream& out, const WindowSet& ws) {
  out << "sample,track_id,mmsi,part,step";
  for (const auto& name : feature_names(ws.set)) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < ws.samples.size(); ++i) {
    const auto& s = ws.samples[i];
    for (std::size_t k = 0; k < s.input.size(); ++k) {
      out << i << ',' << s.track_id << ',' << s.mmsi << ",input," << k;
      for (double v : s.input[k]) out << ',' << text::format_double(v);
      out << '\n';
    }
    for (std::size_t k = 0; k < s.target.size(); ++k) {
      out << i << ',' << s.track_id << ',' << s.mmsi << ",target," << k << ',' << text::format_double(s.target[k][1])
          << ',' << text::format_double(s.target[k][0]);
      for (std::size_t c = 2; c < ws.width(); ++c) out << ',';
      out << '\n';
    }
  }
}

}  // namespace voyagecast::features
