#include "voyagecast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "voyagecast/parallel.hpp"
#include "voyagecast/rng.hpp"
#include "voyagecast/text.hpp"

namespace voyagecast::synth {

namespace {

const double kKmPerDeg = geo::kEarthRadiusKm * geo::kPi / 180.0;

struct Vec2 {
  double x = 0.0;  // km east
  double y = 0.0;  // km north
};

Vec2 to_km(const GeoPoint& from, const GeoPoint& to) {
  const double mid = geo::deg2rad((from.lat + to.lat) / 2.0);
  return {(to.lon - from.lon) * kKmPerDeg * std::cos(mid), (to.lat - from.lat) * kKmPerDeg};
}

GeoPoint shift(const GeoPoint& p, const Vec2& km) {
  return {p.lat + km.y / kKmPerDeg, p.lon + km.x / (kKmPerDeg * std::cos(geo::deg2rad(p.lat)))};
}

Vec2 unit(Vec2 v) {
  const double n = std::hypot(v.x, v.y);
  if (n == 0.0) throw std::invalid_argument("repeated lane waypoint");
  return {v.x / n, v.y / n};
}

Vec2 left_normal(const GeoPoint& a, const GeoPoint& b) {
  const Vec2 d = unit(to_km(a, b));
  return {-d.y, d.x};
}

/// The lane displaced sideways by `offset_km`: interior vertices move along
/// the miter direction so every leg stays parallel to the original.
std::vector<GeoPoint> offset_polyline(const std::vector<GeoPoint>& lane, double offset_km) {
  std::vector<GeoPoint> out = lane;
  if (offset_km == 0.0) return out;
  for (std::size_t k = 1; k + 1 < lane.size(); ++k) {
    const Vec2 n1 = left_normal(lane[k - 1], lane[k]);
    const Vec2 n2 = left_normal(lane[k], lane[k + 1]);
    const Vec2 m = unit({n1.x + n2.x, n1.y + n2.y});
    const double scale = offset_km / (m.x * n1.x + m.y * n1.y);
    out[k] = shift(lane[k], {m.x * scale, m.y * scale});
  }
  return out;
}

struct VoyageOut {
  std::vector<ingest::AisMessage> messages;
  std::vector<Label> labels;
};

}  // namespace

void validate(const LaneWorld& world) {
  if (world.branches.empty()) throw std::invalid_argument("world has no branches");
  if (world.prefix.empty()) throw std::invalid_argument("world has no prefix");
  double total = 0.0;
  for (const auto& b : world.branches) {
    if (b.probability < 0.0) throw std::invalid_argument("negative branch probability");
    if (b.waypoints.empty()) throw std::invalid_argument("empty branch");
    total += b.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("branch probabilities must sum to 1");
  if (!(world.speed_min_kn > 0.0) || world.speed_max_kn < world.speed_min_kn) {
    throw std::invalid_argument("invalid speed band");
  }
  if (!(world.report_interval_min > world.report_jitter_min) || world.report_jitter_min < 0.0) {
    throw std::invalid_argument("invalid report interval");
  }
  const grid::HexGrid g = build_grid(world);
  for (std::size_t b = 0; b < world.branches.size(); ++b) {
    for (const auto& p : lane_polyline(world, b)) {
      if (!g.locate(p)) throw std::invalid_argument("lane waypoint outside the grid");
    }
  }
}

grid::HexGrid build_grid(const LaneWorld& world) {
  return grid::HexGrid::build(world.bbox, world.cell_size_deg);
}

std::vector<GeoPoint> lane_polyline(const LaneWorld& world, std::size_t branch) {
  std::vector<GeoPoint> lane = world.prefix;
  const auto& wp = world.branches.at(branch).waypoints;
  lane.insert(lane.end(), wp.begin(), wp.end());
  return lane;
}

Corpus generate(const LaneWorld& world) {
  validate(world);
  const grid::HexGrid g = build_grid(world);

  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& b : world.branches) cumulative.push_back(acc += b.probability);

  std::vector<VoyageOut> per_vessel(world.vessel_count);
  parallel_for(world.vessel_count, [&](std::size_t vessel) {
    Rng rng(Rng::derive(world.seed, vessel));
    VoyageOut& out = per_vessel[vessel];
    const std::uint64_t mmsi = world.first_mmsi + vessel;
    const auto type = rng.uniform() < world.cargo_fraction ? ingest::VesselType::Cargo
                                                           : ingest::VesselType::Tanker;
    double depart = static_cast<double>(world.epoch) + rng.uniform() * world.departure_spread_days * 86400.0;

    for (std::size_t v = 0; v < world.voyages_per_vessel; ++v) {
      const std::size_t branch = rng.weighted_index(cumulative);
      const double speed = rng.uniform(world.speed_min_kn, world.speed_max_kn);
      const double lateral = world.lateral_sigma_km > 0.0 ? rng.normal(0.0, world.lateral_sigma_km) : 0.0;
      const auto path = offset_polyline(lane_polyline(world, branch), lateral);

      std::vector<double> cum{0.0};
      for (std::size_t k = 1; k < path.size(); ++k) {
        cum.push_back(cum.back() + geo::haversine_km(path[k - 1], path[k]));
      }
      const double length = cum.back();

      double wobble = world.cross_track_sigma_km > 0.0 ? rng.normal(0.0, world.cross_track_sigma_km) : 0.0;
      const double innovation =
          world.cross_track_sigma_km * std::sqrt(1.0 - world.cross_track_rho * world.cross_track_rho);

      auto emit = [&](double s, double t) {
        std::size_t seg = 0;
        while (seg + 2 < path.size() && cum[seg + 1] < s) ++seg;
        const double span = cum[seg + 1] - cum[seg];
        const double f = span > 0.0 ? std::clamp((s - cum[seg]) / span, 0.0, 1.0) : 0.0;
        GeoPoint p{path[seg].lat + f * (path[seg + 1].lat - path[seg].lat),
                   path[seg].lon + f * (path[seg + 1].lon - path[seg].lon)};
        const double taper =
            world.taper_km > 0.0 ? std::clamp(std::min(s, length - s) / world.taper_km, 0.0, 1.0) : 1.0;
        if (wobble != 0.0 && taper > 0.0) {
          const Vec2 n = left_normal(path[seg], path[seg + 1]);
          p = shift(p, {n.x * wobble * taper, n.y * wobble * taper});
        }
        ingest::AisMessage m;
        m.mmsi = mmsi;
        m.timestamp = std::llround(t);
        m.pos = p;
        m.vessel_type = type;
        out.messages.push_back(m);
        return p;
      };

      double s = 0.0;
      double t = depart;
      emit(s, t);
      GeoPoint last = path.back();
      while (true) {
        const double dt_min = rng.uniform(world.report_interval_min - world.report_jitter_min,
                                          world.report_interval_min + world.report_jitter_min);
        double kn = speed;
        if (world.speed_sigma_kn > 0.0) kn = std::max(0.5 * world.speed_min_kn, rng.normal(speed, world.speed_sigma_kn));
        if (world.cross_track_sigma_km > 0.0) {
          wobble = world.cross_track_rho * wobble + innovation * rng.normal();
        }
        s += kn * geo::kKmPerNauticalMile * dt_min / 60.0;
        t += dt_min * 60.0;
        if (s >= length) {
          last = emit(length, t);
          break;
        }
        emit(s, t);
      }

      Label label;
      label.track_id = static_cast<std::int64_t>(vessel * world.voyages_per_vessel + v);
      label.mmsi = mmsi;
      label.route_id = world.branches[branch].route_id;
      label.dest_cell = g.locate(last).value_or(-1);
      out.labels.push_back(label);
      depart = t + rng.uniform(1.0, 3.0) * 86400.0;
    }
  });

  Corpus corpus;
  for (auto& v : per_vessel) {
    corpus.messages.insert(corpus.messages.end(), v.messages.begin(), v.messages.end());
    corpus.labels.insert(corpus.labels.end(), v.labels.begin(), v.labels.end());
  }
  return corpus;
}

LaneWorld fork_world(std::uint64_t seed) {
  LaneWorld w;
  w.seed = seed;
  w.bbox = {46.0, 50.0, -66.0, -58.0};
  w.cell_size_deg = 0.3;

  const GeoPoint a{46.78, -65.55}, b{47.6, -63.3}, c{48.6, -58.8};
  const GeoPoint n1{48.5, -62.4}, n2{49.0, -61.0}, n3{48.95, -60.0};
  const GeoPoint s1{47.65, -61.8}, s2{47.85, -60.2};
  w.prefix = {a, b};
  w.branches = {Branch{{n1, n2, n3, c}, 2.0 / 3.0, 0}, Branch{{s1, s2, c}, 1.0 / 3.0, 1}};
  w.ports = {{"A", a}, {"C", c}};

  // A corridor of +-12 km around the middle 70% of a lane leg.
  auto corridor = [](int id, const GeoPoint& p, const GeoPoint& q) {
    const Vec2 n = left_normal(p, q);
    const GeoPoint from{p.lat + 0.15 * (q.lat - p.lat), p.lon + 0.15 * (q.lon - p.lon)};
    const GeoPoint to{p.lat + 0.85 * (q.lat - p.lat), p.lon + 0.85 * (q.lon - p.lon)};
    const double hw = 12.0;
    return grid::make_route(id, {shift(from, {-n.x * hw, -n.y * hw}), shift(to, {-n.x * hw, -n.y * hw}),
                                 shift(to, {n.x * hw, n.y * hw}), shift(from, {n.x * hw, n.y * hw})});
  };
  w.routes = {corridor(0, n1, n2), corridor(1, s1, s2)};
  return w;
}

void write_labels_csv(std::ostream& out, const std::vector<Label>& labels) {
  out << "track_id,route_id,dest_cell,mmsi\n";
  for (const auto& l : labels) {
    out << l.track_id << ',' << l.route_id << ',' << l.dest_cell << ',' << l.mmsi << '\n';
  }
}

std::vector<Label> read_labels_csv(std::istream& in) {
  std::vector<Label> labels;
  std::string line;
  if (!std::getline(in, line) || text::trim(line).substr(0, 25) != "track_id,route_id,dest_ce") {
    throw std::runtime_error("malformed labels header");
  }
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto cols = text::split(line);
    if (cols.size() < 4) throw std::runtime_error("malformed labels row: " + line);
    const auto id = text::to_int<std::int64_t>(cols[0]);
    const auto route = text::to_int<int>(cols[1]);
    const auto dest = text::to_int<int>(cols[2]);
    const auto mmsi = text::to_int<std::uint64_t>(cols[3]);
    if (!id || !route || !dest || !mmsi) throw std::runtime_error("malformed labels row: " + line);
    labels.push_back({*id, *mmsi, *route, *dest});
  }
  return labels;
}

}  // namespace voyagecast::synth
