#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "voyagecast/geometry.hpp"
#include "voyagecast/ingest.hpp"
#include "voyagecast/rng.hpp"

using namespace voyagecast;
using namespace voyagecast::ingest;
using geo::GeoPoint;

namespace {

const grid::BBox kBox{46.0, 50.0, -66.0, -58.0};

AisMessage msg(std::uint64_t mmsi, std::int64_t t, double lat, double lon,
               VesselType type = VesselType::Cargo) {
  AisMessage m;
  m.mmsi = mmsi;
  m.timestamp = t;
  m.pos = {lat, lon};
  m.vessel_type = type;
  return m;
}

Track line_track(std::uint64_t mmsi, GeoPoint from, GeoPoint to, int n, std::int64_t t0,
                 std::int64_t dt) {
  Track t;
  t.mmsi = mmsi;
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    t.points.push_back({t0 + dt * i, {from.lat + f * (to.lat - from.lat), from.lon + f * (to.lon - from.lon)}, {}});
  }
  recompute_kinematics(t);
  return t;
}

}  // namespace

TEST_CASE("ISO-8601 round trip and known epochs") {
  CHECK(parse_iso8601("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_iso8601("2000-03-01T00:00:00Z") == 951868800);
  CHECK(parse_iso8601("2021-06-15T12:34:56") == 1623760496);
  CHECK(parse_iso8601("2021-06-15T12:34:56.250Z") == 1623760496);
  CHECK(parse_iso8601("2021-06-15T14:34:56+02:00") == 1623760496);
  CHECK(parse_iso8601("1969-12-31T23:59:59Z") == -1);
  CHECK(format_iso8601(1623760496) == "2021-06-15T12:34:56Z");
  CHECK(format_iso8601(-1) == "1969-12-31T23:59:59Z");
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto t = static_cast<std::int64_t>(rng.uniform(-2e9, 4e9));
    CHECK(parse_iso8601(format_iso8601(t)) == t);
  }
  CHECK_THROWS_AS(parse_iso8601("2021-13-01T00:00:00Z"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso8601("yesterday"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso8601("2021-06-15T12:34:56PST"), std::invalid_argument);
}

TEST_CASE("vessel type parsing") {
  CHECK(parse_vessel_type("Cargo") == VesselType::Cargo);
  CHECK(parse_vessel_type("tanker") == VesselType::Tanker);
  CHECK(parse_vessel_type("71") == VesselType::Cargo);
  CHECK(parse_vessel_type("84") == VesselType::Tanker);
  CHECK(parse_vessel_type("30") == VesselType::Other);
  CHECK(to_string(VesselType::Tanker) == "tanker");
}

TEST_CASE("CSV parse counts and skips malformed rows") {
  std::istringstream in(
      "mmsi,timestamp_iso8601,lat,lon,sog_knots,cog_deg,vessel_type\n"
      "316001,2021-01-01T00:00:00Z,47.5,-61.0,12.5,90,cargo\n"
      "316001,2021-01-01T00:10:00Z,47.5,-60.9,,,cargo\n"
      "316002,not-a-time,47.5,-61.0,12,90,tanker\n"
      "316002,2021-01-01T00:00:00Z,95.0,-61.0,12,90,tanker\n"
      "316002,2021-01-01T00:00:00Z,47.0\n"
      "\n"
      "abc,2021-01-01T00:00:00Z,47.0,-61.0,12,90,tanker\n");
  const auto r = parse_csv(in);
  CHECK(r.messages.size() == 2);
  CHECK(r.skipped == 4);
  CHECK(r.messages[0].sog == 12.5);
  CHECK_FALSE(r.messages[1].sog.has_value());

  std::ostringstream out;
  write_csv(out, r.messages);
  std::istringstream again(out.str());
  const auto r2 = parse_csv(again);
  REQUIRE(r2.messages.size() == 2);
  CHECK(r2.messages[0].pos == r.messages[0].pos);
  CHECK(r2.messages[1].timestamp == r.messages[1].timestamp);

  std::istringstream bad("id,time\n1,2\n");
  CHECK_THROWS_AS(parse_csv(bad), std::runtime_error);
  CHECK_THROWS_AS(parse_csv(std::filesystem::path("/nonexistent/file.csv")), std::runtime_error);
}

TEST_CASE("segmentation splits on 8 h gaps and 50 km jumps only") {
  std::vector<AisMessage> m;
  // Vessel 1: gap of exactly 8 h stays, 8 h + 1 s splits.
  m.push_back(msg(1, 0, 47.0, -62.0));
  m.push_back(msg(1, 8 * 3600, 47.0, -61.9));
  m.push_back(msg(1, 16 * 3600 + 1, 47.0, -61.8));
  // Vessel 2: a 60 km jump splits, a 40 km hop does not.
  m.push_back(msg(2, 0, 47.0, -62.0));
  m.push_back(msg(2, 600, 47.0 + 40.0 / 111.19, -62.0));
  m.push_back(msg(2, 1200, 47.0 + 100.0 / 111.19, -62.0));
  // Out-of-order input and a duplicate timestamp.
  m.push_back(msg(3, 600, 47.0, -61.99));
  m.push_back(msg(3, 0, 47.0, -62.0));
  m.push_back(msg(3, 600, 48.0, -50.0));

  const auto tracks = segment(m);
  REQUIRE(tracks.size() == 5);
  CHECK(tracks[0].mmsi == 1);
  CHECK(tracks[0].points.size() == 2);
  CHECK(tracks[1].points.size() == 1);
  CHECK(tracks[2].mmsi == 2);
  CHECK(tracks[2].points.size() == 2);
  CHECK(tracks[3].points.size() == 1);
  CHECK(tracks[4].mmsi == 3);
  CHECK(tracks[4].points.size() == 2);
  CHECK(tracks[4].points[1].pos.lon == -61.99);

  // Property: within every output track consecutive messages respect both limits.
  Rng rng(9);
  std::vector<AisMessage> random;
  for (int i = 0; i < 2000; ++i) {
    random.push_back(msg(rng.index(5), static_cast<std::int64_t>(rng.uniform(0, 30 * 86400)),
                         rng.uniform(46, 50), rng.uniform(-66, -58)));
  }
  std::size_t total = 0;
  for (const auto& t : segment(random)) {
    total += t.points.size();
    for (std::size_t i = 1; i < t.points.size(); ++i) {
      CHECK(t.points[i].timestamp > t.points[i - 1].timestamp);
      CHECK(t.points[i].timestamp - t.points[i - 1].timestamp <= 8 * 3600);
      CHECK(oracle::chord_distance_km(t.points[i].pos, t.points[i - 1].pos) <= 50.0 + 1e-9);
    }
  }
  std::set<std::pair<std::uint64_t, std::int64_t>> unique;
  for (const auto& a : random) unique.insert({a.mmsi, a.timestamp});
  CHECK(total == unique.size());
}

TEST_CASE("self-intersection detection") {
  Track straight = line_track(1, {47, -62}, {47, -60}, 10, 0, 600);
  CHECK_FALSE(is_self_intersecting(straight));
  Track loop;
  for (GeoPoint p : {GeoPoint{47, -62}, GeoPoint{47, -61}, GeoPoint{48, -61}, GeoPoint{47.5, -62.5},
                     GeoPoint{46.5, -60.5}}) {
    loop.points.push_back({0, p, {}});
  }
  CHECK(is_self_intersecting(loop));
  Track stalled = straight;
  stalled.points.insert(stalled.points.begin() + 3, stalled.points[3]);
  CHECK_FALSE(is_self_intersecting(stalled));
  Track back_and_forth = line_track(1, {47, -62}, {47, -61}, 3, 0, 600);
  back_and_forth.points.push_back({1800, {47, -61.75}, {}});
  CHECK(is_self_intersecting(back_and_forth));
}

TEST_CASE("clean removes port messages and rejected tracks") {
  const auto g = grid::HexGrid::build(kBox, 0.3);
  const std::vector<Port> ports{{"west", {47.0, -65.0}}, {"east", {47.0, -59.0}}};

  std::vector<Track> tracks;
  for (int i = 0; i < 6; ++i) tracks.push_back(line_track(100 + i, {47, -65}, {47, -59}, 50, 0, 600));
  // Same port at both ends.
  Track round_trip = line_track(200, {47, -65}, {47.01, -64.95}, 20, 0, 600);
  tracks.push_back(round_trip);
  // Sparse pattern (only one member).
  tracks.push_back(line_track(300, {48.5, -64}, {49.5, -60}, 30, 0, 600));
  // Single message away from ports.
  tracks.push_back(line_track(400, {48, -62}, {48, -62}, 1, 0, 600));
  // Leaves the grid.
  tracks.push_back(line_track(500, {47, -62}, {45, -62}, 10, 0, 600));

  CleanReport rep;
  const auto kept = clean(tracks, ports, g, {}, &rep);
  REQUIRE(kept.size() == 6);
  CHECK(rep.too_short == 1);
  CHECK(rep.outside_grid == 1);
  CHECK(rep.sparse_pattern == 1);
  CHECK(rep.port_messages_removed > 0);
  for (const auto& t : kept) {
    for (const auto& p : t.points) {
      for (const auto& port : ports) CHECK(oracle::chord_distance_km(p.pos, port.pos) > 1.0);
    }
    CHECK(t.start_cell == g.locate(t.points.front().pos));
    CHECK(t.end_cell == g.locate(t.points.back().pos));
  }
  CHECK(rep.same_port == 1);
}

TEST_CASE("clean without ports rejects same-cell round trips") {
  const auto g = grid::HexGrid::build(kBox, 0.3);
  std::vector<Track> tracks;
  for (int i = 0; i < 6; ++i) tracks.push_back(line_track(100 + i, {47, -65}, {47, -59}, 50, 0, 600));
  for (int i = 0; i < 6; ++i) tracks.push_back(line_track(200 + i, {47, -62}, {47.01, -62.01}, 5, 0, 600));
  CleanReport rep;
  const auto kept = clean(tracks, {}, g, {}, &rep);
  CHECK(kept.size() == 6);
  CHECK(rep.same_port == 6);
}

TEST_CASE("10-minute interpolation") {
  Track t;
  t.mmsi = 7;
  t.points = {{0, {47.0, -62.0}, {}}, {700, {47.0, -61.9}, {}}, {2000, {47.2, -61.9}, {}}};
  const Track linear = interpolate_10min(t);
  REQUIRE(linear.points.size() == 4);
  for (std::size_t i = 0; i < linear.points.size(); ++i) {
    CHECK(linear.points[i].timestamp == static_cast<std::int64_t>(600 * i));
  }
  CHECK(linear.points[1].pos.lon == doctest::Approx(-62.0 + 0.1 * 600.0 / 700.0));
  CHECK(linear.points[2].pos.lat == doctest::Approx(47.0 + 0.2 * 500.0 / 1300.0));
  CHECK(linear.points[0].pos == t.points[0].pos);

  const Track gc = interpolate_10min(t, Interpolation::GreatCircle);
  REQUIRE(gc.points.size() == 4);
  CHECK(gc.points[1].pos.lon == doctest::Approx(linear.points[1].pos.lon).epsilon(1e-4));
  // Great-circle midpoints stay on the arc: distances add up.
  const double whole = oracle::chord_distance_km(t.points[0].pos, t.points[1].pos);
  const double part = oracle::chord_distance_km(t.points[0].pos, gc.points[1].pos) +
                      oracle::chord_distance_km(gc.points[1].pos, t.points[1].pos);
  CHECK(part == doctest::Approx(whole).epsilon(1e-9));

  Track one;
  one.points = {{0, {47, -62}, {}}};
  CHECK_THROWS_AS(interpolate_10min(one), std::invalid_argument);

  // Property: random irregular tracks resample to exact 600 s spacing.
  Rng rng(21);
  for (int k = 0; k < 50; ++k) {
    Track r;
    std::int64_t ts = 0;
    for (int i = 0; i < 30; ++i) {
      ts += 60 + static_cast<std::int64_t>(rng.index(900));
      r.points.push_back({ts, {rng.uniform(46, 50), rng.uniform(-66, -58)}, {}});
    }
    const Track d = interpolate_10min(r);
    CHECK(d.points.front().timestamp == r.points.front().timestamp);
    CHECK(d.points.back().timestamp <= r.points.back().timestamp);
    CHECK(r.points.back().timestamp - d.points.back().timestamp < 600);
    for (std::size_t i = 1; i < d.points.size(); ++i) {
      CHECK(d.points[i].timestamp - d.points[i - 1].timestamp == 600);
    }
  }
}

TEST_CASE("turn splitting at 45 gradians") {
  // East, then a sharp turn north.
  Track t;
  for (int i = 0; i < 5; ++i) t.points.push_back({600 * i, {47.0, -62.0 + 0.05 * i}, {}});
  for (int i = 1; i <= 5; ++i) t.points.push_back({600 * (4 + i), {47.0 + 0.05 * i, -61.8}, {}});
  recompute_kinematics(t);
  const auto pieces = split_on_turn(t);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].points.size() == 5);
  CHECK(pieces[1].points.size() == 5);

  // A 40 degree (44.4 gradian) bend does not split.
  Track gentle;
  gentle.points.push_back({0, {47.0, -62.0}, {}});
  gentle.points.push_back({600, {47.0, -61.9}, {}});
  const double b = geo::deg2rad(50.0);
  gentle.points.push_back(
      {1200, {47.0 + 0.1 * std::cos(b), -61.9 + 0.1 * std::sin(b) / std::cos(geo::deg2rad(47.0))}, {}});
  recompute_kinematics(gentle);
  REQUIRE(std::abs(gentle.points[2].kin.dtheta) < 45.0);
  CHECK(split_on_turn(gentle).size() == 1);

  // Property: no surviving piece has an internal step above the limit.
  Rng rng(4);
  for (int k = 0; k < 40; ++k) {
    Track r;
    for (int i = 0; i < 40; ++i) r.points.push_back({600 * i, {rng.uniform(46, 50), rng.uniform(-66, -58)}, {}});
    recompute_kinematics(r);
    std::size_t kept = 0;
    for (const auto& p : split_on_turn(r)) {
      CHECK(p.points.size() >= 2);
      kept += p.points.size();
      for (std::size_t i = 2; i < p.points.size(); ++i) CHECK(std::abs(p.points[i].kin.dtheta) <= 45.0);
    }
    CHECK(kept <= r.points.size());
  }
}

TEST_CASE("reversal is an involution and keeps spacing") {
  Rng rng(8);
  Track t;
  t.mmsi = 55;
  t.start_cell = 3;
  t.end_cell = 9;
  std::int64_t ts = 1000;
  for (int i = 0; i < 25; ++i) {
    ts += 600;
    t.points.push_back({ts, {rng.uniform(46, 50), rng.uniform(-66, -58)}, {}});
  }
  recompute_kinematics(t);
  const Track r = reversed(t);
  CHECK(r.reversed);
  CHECK(r.mmsi == 55);
  CHECK(r.start_cell == 9);
  CHECK(r.end_cell == 3);
  CHECK(r.points.front().pos == t.points.back().pos);
  CHECK(r.points.front().timestamp == t.points.front().timestamp);
  for (std::size_t i = 1; i < r.points.size(); ++i) CHECK(r.points[i].timestamp - r.points[i - 1].timestamp == 600);
  // The reversed copy walks each leg backwards.
  const double back = r.points[r.points.size() - 5].kin.theta;
  CHECK(back == doctest::Approx(oracle::tangent_bearing_deg(t.points[5].pos, t.points[4].pos) * 400.0 / 360.0));

  const Track rr = reversed(r);
  CHECK_FALSE(rr.reversed);
  REQUIRE(rr.points.size() == t.points.size());
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    CHECK(rr.points[i].pos == t.points[i].pos);
    CHECK(rr.points[i].timestamp == t.points[i].timestamp);
    CHECK(rr.points[i].kin.theta == doctest::Approx(t.points[i].kin.theta));
  }
  const auto aug = augment_reverse({t});
  REQUIRE(aug.size() == 2);
  CHECK_FALSE(aug[0].reversed);
  CHECK(aug[1].reversed);
}

TEST_CASE("strata weights sum to the track count") {
  const auto g = grid::HexGrid::build(kBox, 0.3);
  std::vector<Track> tracks;
  for (int i = 0; i < 6; ++i) tracks.push_back(line_track(i, {47, -65}, {47, -59}, 10, 0, 600));
  for (int i = 0; i < 2; ++i) tracks.push_back(line_track(10 + i, {49, -65}, {49, -59}, 10, 0, 600));
  const auto out = assign_strata(tracks, g);
  double total = 0.0;
  std::map<std::pair<int, int>, double> per_stratum;
  for (const auto& t : out) {
    total += t.weight;
    per_stratum[{t.start_cell, t.end_cell}] += t.weight;
  }
  CHECK(total == doctest::Approx(8.0));
  for (const auto& [k, w] : per_stratum) CHECK(w == doctest::Approx(4.0));
}

TEST_CASE("stratified split is MMSI-disjoint with 20% test share") {
  std::vector<Track> tracks;
  for (int s = 0; s < 4; ++s) {
    for (int v = 0; v < 50; ++v) {
      for (int copy = 0; copy < 3; ++copy) {
        Track t;
        t.mmsi = static_cast<std::uint64_t>(s * 1000 + v);
        t.start_cell = s;
        t.end_cell = s + 10;
        t.points = {{copy * 100000, {47, -62}, {}}, {copy * 100000 + 600, {47, -61.9}, {}}};
        tracks.push_back(t);
      }
    }
  }
  const auto split = stratify_and_split(tracks, {0.2, 0.2, 42});
  std::set<std::uint64_t> tr, va, te;
  for (const auto& t : split.train) tr.insert(t.mmsi);
  for (const auto& t : split.val) va.insert(t.mmsi);
  for (const auto& t : split.test) te.insert(t.mmsi);
  for (auto m : te) {
    CHECK_FALSE(tr.count(m));
    CHECK_FALSE(va.count(m));
  }
  for (auto m : va) CHECK_FALSE(tr.count(m));
  CHECK(te.size() == 40);
  CHECK(va.size() == 32);
  CHECK(tr.size() == 128);
  CHECK(split.train.size() + split.val.size() + split.test.size() == tracks.size());
  std::map<int, int> test_per_stratum;
  for (const auto& t : split.test) ++test_per_stratum[t.start_cell];
  for (const auto& [s, n] : test_per_stratum) CHECK(n == 30);

  const auto again = stratify_and_split(tracks, {0.2, 0.2, 42});
  CHECK(again.test.size() == split.test.size());
  for (std::size_t i = 0; i < again.test.size(); ++i) CHECK(again.test[i].mmsi == split.test[i].mmsi);
  CHECK_THROWS_AS(stratify_and_split({}), std::invalid_argument);
}

TEST_CASE("tracks CSV round trip") {
  std::vector<Track> tracks{line_track(9, {47, -62}, {47.5, -61}, 6, 0, 600),
                            line_track(9, {48, -62}, {48.5, -61}, 4, 9000, 600)};
  tracks[0].track_id = 0;
  tracks[1].track_id = 1;
  std::ostringstream out;
  write_tracks_csv(out, tracks);
  std::istringstream in(out.str());
  const auto back = read_tracks_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1].points.size() == 4);
  CHECK(back[0].points[3].pos == tracks[0].points[3].pos);
  CHECK(back[0].points[3].kin.v == doctest::Approx(tracks[0].points[3].kin.v));
}

TEST_CASE("pipeline end to end on straight lanes") {
  const auto g = grid::HexGrid::build(kBox, 0.3);
  const std::vector<Port> ports{{"west", {47.0, -65.5}}, {"east", {47.0, -58.5}}};
  std::vector<AisMessage> m;
  for (int v = 0; v < 8; ++v) {
    for (int i = 0; i <= 100; ++i) {
      m.push_back(msg(500 + v, 86400 * v + 420 * i, 47.0, -65.5 + 7.0 * i / 100.0));
    }
  }
  PipelineReport rep;
  const auto tracks = run_pipeline(m, ports, g, {}, &rep);
  CHECK(rep.raw_tracks == 8);
  REQUIRE(tracks.size() == 16);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    CHECK(tracks[i].track_id == static_cast<std::int64_t>(i));
    CHECK(tracks[i].reversed == (i % 2 == 1));
    CHECK(tracks[i].weight == doctest::Approx(1.0));
    for (std::size_t k = 1; k < tracks[i].points.size(); ++k) {
      CHECK(tracks[i].points[k].timestamp - tracks[i].points[k - 1].timestamp == 600);
    }
  }
}
