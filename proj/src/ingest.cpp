#include "voyagecast/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "voyagecast/geometry.hpp"
#include "voyagecast/rng.hpp"
#include "voyagecast/text.hpp"

namespace voyagecast::ingest {

namespace {

constexpr std::string_view kHeader = "mmsi,timestamp_iso8601,lat,lon,sog_knots,cog_deg,vessel_type";
constexpr std::string_view kTrackHeader =
    "mmsi,timestamp_iso8601,lat,lon,sog_knots,cog_deg,vessel_type,track_id";

// Howard Hinnant's days_from_civil / civil_from_days.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string opt_to_string(const std::optional<double>& v) {
  return v ? text::format_double(*v) : std::string{};
}

bool read_header(std::istream& in, std::string_view expected_prefix) {
  std::string line;
  if (!std::getline(in, line)) return false;
  const std::string_view h = text::trim(line);
  if (h.substr(0, expected_prefix.size()) != expected_prefix) {
    throw std::runtime_error("malformed header: expected '" + std::string(expected_prefix) + "'");
  }
  return true;
}

std::optional<AisMessage> parse_row(std::string_view line) {
  const auto cols = text::split(line);
  if (cols.size() < 7) return std::nullopt;
  AisMessage m;
  const auto mmsi = text::to_int<std::uint64_t>(cols[0]);
  const auto lat = text::to_double(cols[2]);
  const auto lon = text::to_double(cols[3]);
  if (!mmsi || !lat || !lon) return std::nullopt;
  if (!std::isfinite(*lat) || !std::isfinite(*lon) || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 ||
      *lon > 180.0) {
    return std::nullopt;
  }
  try {
    m.timestamp = parse_iso8601(text::trim(cols[1]));
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  m.mmsi = *mmsi;
  m.pos = {*lat, *lon};
  if (!text::trim(cols[4]).empty()) {
    m.sog = text::to_double(cols[4]);
    if (!m.sog) return std::nullopt;
  }
  if (!text::trim(cols[5]).empty()) {
    m.cog = text::to_double(cols[5]);
    if (!m.cog) return std::nullopt;
  }
  m.vessel_type = parse_vessel_type(text::trim(cols[6]));
  return m;
}

GeoPoint lerp(const GeoPoint& a, const GeoPoint& b, double t) {
  return {a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)};
}

GeoPoint slerp(const GeoPoint& a, const GeoPoint& b, double t) {
  const double la = geo::deg2rad(a.lat), oa = geo::deg2rad(a.lon);
  const double lb = geo::deg2rad(b.lat), ob = geo::deg2rad(b.lon);
  const double ax = std::cos(la) * std::cos(oa), ay = std::cos(la) * std::sin(oa), az = std::sin(la);
  const double bx = std::cos(lb) * std::cos(ob), by = std::cos(lb) * std::sin(ob), bz = std::sin(lb);
  const double dot = std::clamp(ax * bx + ay * by + az * bz, -1.0, 1.0);
  const double omega = std::acos(dot);
  if (omega < 1e-12) return lerp(a, b, t);
  const double s = std::sin(omega);
  const double wa = std::sin((1.0 - t) * omega) / s, wb = std::sin(t * omega) / s;
  const double x = wa * ax + wb * bx, y = wa * ay + wb * by, z = wa * az + wb * bz;
  return {geo::rad2deg(std::atan2(z, std::hypot(x, y))), geo::rad2deg(std::atan2(y, x))};
}

using Pattern = std::pair<int, int>;

std::optional<Pattern> pattern_of(const Track& t, const grid::HexGrid& grid) {
  if (t.points.empty()) return std::nullopt;
  const auto s = grid.locate(t.points.front().pos);
  const auto e = grid.locate(t.points.back().pos);
  if (!s || !e) return std::nullopt;
  return Pattern{*s, *e};
}

std::optional<std::size_t> nearest_port(const GeoPoint& p, std::span<const Port> ports,
                                        double radius_km) {
  std::optional<std::size_t> best;
  double best_d = radius_km;
  for (std::size_t i = 0; i < ports.size(); ++i) {
    const double d = geo::haversine_km(p, ports[i].pos);
    if (d <= best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(VesselType t) {
  switch (t) {
    case VesselType::Cargo:
      return "cargo";
    case VesselType::Tanker:
      return "tanker";
    case VesselType::Other:
      break;
  }
  return "other";
}

VesselType parse_vessel_type(std::string_view s) {
  const std::string l = lower(text::trim(s));
  if (l == "cargo") return VesselType::Cargo;
  if (l == "tanker") return VesselType::Tanker;
  if (const auto code = text::to_int<int>(l)) {
    if (*code >= 70 && *code <= 79) return VesselType::Cargo;
    if (*code >= 80 && *code <= 89) return VesselType::Tanker;
  }
  return VesselType::Other;
}

std::int64_t parse_iso8601(std::string_view s) {
  auto num = [&s](std::size_t pos, std::size_t len) -> int {
    if (pos + len > s.size()) throw std::invalid_argument("truncated timestamp");
    const auto v = text::to_int<int>(s.substr(pos, len));
    if (!v) throw std::invalid_argument("malformed timestamp");
    return *v;
  };
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    throw std::invalid_argument("malformed timestamp");
  }
  const int y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2),
            sec = num(17, 2);
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) {
    throw std::invalid_argument("timestamp field out of range");
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    const std::string_view tz = s.substr(pos);
    if (tz == "Z") {
    } else if (tz.size() == 6 && (tz[0] == '+' || tz[0] == '-') && tz[3] == ':') {
      const int oh = num(pos + 1, 2), om = num(pos + 4, 2);
      offset = (oh * 3600 + om * 60) * (tz[0] == '+' ? 1 : -1);
    } else {
      throw std::invalid_argument("unsupported timezone designator");
    }
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 + h * 3600 +
         mi * 60 + sec - offset;
}

std::string format_iso8601(std::int64_t seconds) {
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m,
                d, static_cast<long long>(rem / 3600), static_cast<long long>((rem % 3600) / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

ParseResult parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_csv(in);
}

ParseResult parse_csv(std::istream& in) {
  ParseResult result;
  if (!read_header(in, kHeader)) return result;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    if (auto m = parse_row(line)) {
      result.messages.push_back(*m);
    } else {
      ++result.skipped;
    }
  }
  return result;
}

void write_csv(std::ostream& out, std::span<const AisMessage> messages) {
  out << kHeader << '\n';
  for (const auto& m : messages) {
    out << m.mmsi << ',' << format_iso8601(m.timestamp) << ',' << text::format_double(m.pos.lat) << ','
        << text::format_double(m.pos.lon) << ',' << opt_to_string(m.sog) << ',' << opt_to_string(m.cog)
        << ',' << to_string(m.vessel_type) << '\n';
  }
}

std::vector<Port> parse_ports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_ports(in);
}

std::vector<Port> parse_ports(std::istream& in) {
  std::vector<Port> ports;
  if (!read_header(in, "name,lat,lon")) return ports;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line);
    if (cols.size() < 3) throw std::runtime_error("malformed ports row: " + line);
    const auto lat = text::to_double(cols[1]);
    const auto lon = text::to_double(cols[2]);
    if (!lat || !lon) throw std::runtime_error("malformed ports row: " + line);
    ports.push_back({std::string(text::trim(cols[0])), geo::make_point(*lat, *lon)});
  }
  return ports;
}

void write_ports(std::ostream& out, std::span<const Port> ports) {
  out << "name,lat,lon\n";
  for (const auto& p : ports) {
    out << p.name << ',' << text::format_double(p.pos.lat) << ',' << text::format_double(p.pos.lon)
        << '\n';
  }
}

void write_tracks_csv(std::ostream& out, std::span<const Track> tracks) {
  out << kTrackHeader << '\n';
  for (const auto& t : tracks) {
    for (const auto& p : t.points) {
      out << t.mmsi << ',' << format_iso8601(p.timestamp) << ',' << text::format_double(p.pos.lat)
          << ',' << text::format_double(p.pos.lon) << ',' << text::format_double(p.kin.v) << ','
          << text::format_double(geo::from_gradian(p.kin.theta)) << ',' << to_string(t.vessel_type)
          << ',' << t.track_id << '\n';
    }
  }
}

std::vector<Track> read_tracks_csv(std::istream& in) {
  std::vector<Track> tracks;
  if (!read_header(in, kTrackHeader)) return tracks;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto m = parse_row(line);
    const auto cols = text::split(line);
    const auto id = cols.size() >= 8 ? text::to_int<std::int64_t>(cols[7]) : std::nullopt;
    if (!m || !id) throw std::runtime_error("malformed track row at line " + std::to_string(lineno));
    if (tracks.empty() || tracks.back().track_id != *id) {
      Track t;
      t.track_id = *id;
      t.mmsi = m->mmsi;
      t.vessel_type = m->vessel_type;
      tracks.push_back(std::move(t));
    }
    tracks.back().points.push_back({m->timestamp, m->pos, {}});
  }
  for (auto& t : tracks) recompute_kinematics(t);
  return tracks;
}

std::vector<Track> segment(std::span<const AisMessage> messages, const SegmentOptions& opts) {
  std::vector<const AisMessage*> order;
  order.reserve(messages.size());
  for (const auto& m : messages) order.push_back(&m);
  std::stable_sort(order.begin(), order.end(), [](const AisMessage* a, const AisMessage* b) {
    return a->mmsi != b->mmsi ? a->mmsi < b->mmsi : a->timestamp < b->timestamp;
  });

  const double gap_seconds = opts.gap_hours * 3600.0;
  std::vector<Track> tracks;
  const AisMessage* prev = nullptr;
  for (const AisMessage* m : order) {
    const bool same_vessel = prev && prev->mmsi == m->mmsi;
    if (same_vessel && m->timestamp == prev->timestamp) continue;
    const bool split = !same_vessel ||
                       static_cast<double>(m->timestamp - prev->timestamp) > gap_seconds ||
                       geo::haversine_km(prev->pos, m->pos) > opts.gap_km;
    if (split) {
      Track t;
      t.mmsi = m->mmsi;
      t.vessel_type = m->vessel_type;
      tracks.push_back(std::move(t));
    }
    tracks.back().points.push_back({m->timestamp, m->pos, {}});
    prev = m;
  }
  for (auto& t : tracks) recompute_kinematics(t);
  return tracks;
}

bool is_self_intersecting(const Track& track) {
  std::vector<GeoPoint> line;
  for (const auto& p : track.points) {
    if (line.empty() || !(line.back() == p.pos)) line.push_back(p.pos);
  }
  const std::size_t n = line.size();
  if (n < 4) return false;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const GeoPoint& a1 = line[i];
    const GeoPoint& a2 = line[i + 1];
    const double alo = std::min(a1.lon, a2.lon), ahi = std::max(a1.lon, a2.lon);
    const double blo = std::min(a1.lat, a2.lat), bhi = std::max(a1.lat, a2.lat);
    for (std::size_t j = i + 2; j + 1 < n; ++j) {
      const GeoPoint& b1 = line[j];
      const GeoPoint& b2 = line[j + 1];
      if (std::max(b1.lon, b2.lon) < alo || std::min(b1.lon, b2.lon) > ahi ||
          std::max(b1.lat, b2.lat) < blo || std::min(b1.lat, b2.lat) > bhi) {
        continue;
      }
      if (geometry::segments_intersect(a1, a2, b1, b2)) return true;
    }
  }
  return false;
}

std::vector<Track> clean(std::vector<Track> tracks, std::span<const Port> ports,
                         const grid::HexGrid& grid, const CleanOptions& opts, CleanReport* report) {
  CleanReport local;
  CleanReport& rep = report ? *report : local;

  std::vector<Track> kept;
  std::vector<Pattern> patterns;
  for (auto& t : tracks) {
    if (!ports.empty()) {
      const std::size_t before = t.points.size();
      std::erase_if(t.points, [&](const TrackPoint& p) {
        return nearest_port(p.pos, ports, opts.port_radius_km).has_value();
      });
      rep.port_messages_removed += before - t.points.size();
    }
    if (t.points.size() < 2) {
      ++rep.too_short;
      continue;
    }
    if (is_self_intersecting(t)) {
      ++rep.self_intersecting;
      continue;
    }
    const auto pattern = pattern_of(t, grid);
    if (!pattern) {
      ++rep.outside_grid;
      continue;
    }
    bool same_port = false;
    if (ports.empty()) {
      same_port = pattern->first == pattern->second;
    } else {
      const auto sp = nearest_port(t.points.front().pos, ports, opts.same_port_radius_km);
      const auto ep = nearest_port(t.points.back().pos, ports, opts.same_port_radius_km);
      same_port = sp && ep && *sp == *ep;
    }
    if (same_port) {
      ++rep.same_port;
      continue;
    }
    recompute_kinematics(t);
    t.start_cell = pattern->first;
    t.end_cell = pattern->second;
    patterns.push_back(*pattern);
    kept.push_back(std::move(t));
  }

  std::map<Pattern, int> population;
  for (const auto& p : patterns) ++population[p];
  std::vector<Track> out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (population[patterns[i]] <= opts.min_pattern_count) {
      ++rep.sparse_pattern;
      continue;
    }
    out.push_back(std::move(kept[i]));
  }
  return out;
}

void recompute_kinematics(Track& track) {
  std::vector<GeoPoint> pts;
  std::vector<std::int64_t> ts;
  pts.reserve(track.points.size());
  ts.reserve(track.points.size());
  for (const auto& p : track.points) {
    pts.push_back(p.pos);
    ts.push_back(p.timestamp);
  }
  const auto kin = geo::kinematics_series(pts, ts);
  for (std::size_t i = 0; i < kin.size(); ++i) track.points[i].kin = kin[i];
}

Track interpolate_10min(const Track& track, Interpolation mode) {
  if (track.points.size() < 2) throw std::invalid_argument("interpolation needs at least 2 points");
  Track out = track;
  out.points.clear();
  const auto& pts = track.points;
  const std::int64_t t0 = pts.front().timestamp;
  const std::int64_t t1 = pts.back().timestamp;
  std::size_t seg = 0;
  for (std::int64_t t = t0; t <= t1; t += kStepSeconds) {
    while (seg + 2 < pts.size() && pts[seg + 1].timestamp < t) ++seg;
    const TrackPoint& a = pts[seg];
    const TrackPoint& b = pts[seg + 1];
    GeoPoint pos;
    if (t <= a.timestamp) {
      pos = a.pos;
    } else if (t >= b.timestamp) {
      pos = b.pos;
    } else {
      const double f = static_cast<double>(t - a.timestamp) / static_cast<double>(b.timestamp - a.timestamp);
      pos = mode == Interpolation::Linear ? lerp(a.pos, b.pos, f) : slerp(a.pos, b.pos, f);
    }
    out.points.push_back({t, pos, {}});
  }
  recompute_kinematics(out);
  return out;
}

std::vector<Track> split_on_turn(const Track& track, double limit_gradian) {
  std::vector<Track> pieces;
  Track current = track;
  current.points.clear();
  auto flush = [&] {
    if (current.points.size() >= 2) {
      recompute_kinematics(current);
      pieces.push_back(current);
    }
    current.points.clear();
  };
  for (std::size_t i = 0; i < track.points.size(); ++i) {
    if (i > 0 && std::abs(track.points[i].kin.dtheta) > limit_gradian) flush();
    current.points.push_back(track.points[i]);
  }
  flush();
  return pieces;
}

Track reversed(const Track& track) {
  Track r = track;
  r.reversed = !track.reversed;
  const std::size_t n = track.points.size();
  if (n == 0) return r;
  const std::int64_t first = track.points.front().timestamp;
  const std::int64_t last = track.points.back().timestamp;
  for (std::size_t i = 0; i < n; ++i) {
    const TrackPoint& src = track.points[n - 1 - i];
    r.points[i] = {first + (last - src.timestamp), src.pos, {}};
  }
  std::swap(r.start_cell, r.end_cell);
  recompute_kinematics(r);
  return r;
}

std::vector<Track> augment_reverse(std::vector<Track> tracks) {
  std::vector<Track> out;
  out.reserve(tracks.size() * 2);
  for (auto& t : tracks) {
    Track rev = reversed(t);
    out.push_back(std::move(t));
    out.push_back(std::move(rev));
  }
  return out;
}

std::vector<Track> assign_strata(std::vector<Track> tracks, const grid::HexGrid& grid) {
  std::vector<Track> out;
  std::map<Pattern, std::size_t> population;
  for (auto& t : tracks) {
    const auto p = pattern_of(t, grid);
    if (!p) continue;
    t.start_cell = p->first;
    t.end_cell = p->second;
    ++population[*p];
    out.push_back(std::move(t));
  }
  const double total = static_cast<double>(out.size());
  const double strata = static_cast<double>(population.size());
  for (auto& t : out) {
    const double count = static_cast<double>(population[{t.start_cell, t.end_cell}]);
    t.weight = total / (strata * count);
  }
  return out;
}

SplitResult stratify_and_split(std::vector<Track> tracks, const SplitOptions& opts) {
  if (tracks.empty()) throw std::invalid_argument("cannot split an empty corpus");

  std::map<std::uint64_t, std::map<Pattern, int>> vessel_patterns;
  for (const auto& t : tracks) ++vessel_patterns[t.mmsi][{t.start_cell, t.end_cell}];

  std::map<Pattern, std::vector<std::uint64_t>> by_pattern;
  for (const auto& [mmsi, counts] : vessel_patterns) {
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    by_pattern[best->first].push_back(mmsi);
  }

  Rng rng(opts.seed);
  std::unordered_map<std::uint64_t, int> assignment;  // 0 train, 1 val, 2 test
  for (auto& [pattern, vessels] : by_pattern) {
    rng.shuffle(vessels);
    const auto n = vessels.size();
    const auto n_test = static_cast<std::size_t>(std::llround(opts.test_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(
        std::llround(opts.val_fraction_of_rest * static_cast<double>(n - n_test)));
    for (std::size_t i = 0; i < n; ++i) {
      assignment[vessels[i]] = i < n_test ? 2 : (i < n_test + n_val ? 1 : 0);
    }
  }

  SplitResult out;
  for (auto& t : tracks) {
    switch (assignment.at(t.mmsi)) {
      case 2:
        out.test.push_back(std::move(t));
        break;
      case 1:
        out.val.push_back(std::move(t));
        break;
      default:
        out.train.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<Track> run_pipeline(std::span<const AisMessage> messages, std::span<const Port> ports,
                                const grid::HexGrid& grid, const PipelineOptions& opts,
                                PipelineReport* report) {
  PipelineReport local;
  PipelineReport& rep = report ? *report : local;

  auto raw = segment(messages, opts.segment);
  rep.raw_tracks = raw.size();
  auto cleaned = clean(std::move(raw), ports, grid, opts.clean, &rep.clean);

  std::vector<Track> pieces;
  for (const auto& t : cleaned) {
    const Track dense = interpolate_10min(t, opts.interpolation);
    if (dense.points.size() < 2) {
      ++rep.clean.too_short;
      continue;
    }
    auto parts = split_on_turn(dense, opts.turn_limit_gradian);
    if (parts.size() > 1) rep.turn_splits += parts.size() - 1;
    for (auto& p : parts) pieces.push_back(std::move(p));
  }
  if (opts.augment_reverse) pieces = augment_reverse(std::move(pieces));
  auto out = assign_strata(std::move(pieces), grid);

  std::stable_sort(out.begin(), out.end(), [](const Track& a, const Track& b) {
    if (a.mmsi != b.mmsi) return a.mmsi < b.mmsi;
    if (a.start_time() != b.start_time()) return a.start_time() < b.start_time();
    return a.reversed < b.reversed;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].track_id = static_cast<std::int64_t>(i);
  rep.final_tracks = out.size();
  return out;
}

}  // namespace voyagecast::ingest
