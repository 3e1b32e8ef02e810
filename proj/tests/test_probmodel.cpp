#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "prob_oracle.hpp"
#include "voyagecast/probmodel.hpp"
#include "voyagecast/rng.hpp"
#include "voyagecast/synth.hpp"

using namespace voyagecast;
namespace pm = voyagecast::probmodel;
using geo::GeoPoint;

namespace {

struct Fixture {
  synth::LaneWorld world;
  grid::HexGrid grid;
  std::vector<ingest::Track> train;
  std::vector<ingest::Track> test;
  pm::ProbabilityStore store;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x{synth::fork_world(21), {}, {}, {}, {}};
    x.world.vessel_count = 150;
    x.grid = synth::build_grid(x.world);
    const auto corpus = synth::generate(x.world);
    auto tracks = ingest::run_pipeline(corpus.messages, x.world.ports, x.grid);
    for (auto& t : tracks) (t.mmsi % 5 == 0 ? x.test : x.train).push_back(std::move(t));
    x.store = pm::build_store(x.train, x.grid, x.world.routes);
    return x;
  }();
  return f;
}

std::vector<int> route_ids(const Fixture& f) {
  std::vector<int> ids;
  for (const auto& r : f.world.routes) ids.push_back(r.id);
  return ids;
}

double resubstitution_entropy(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double h = std::sqrt(var / (n - 1.0)) / std::pow(n, 0.2);
  double total = 0.0;
  for (double a : x) {
    double p = 0.0;
    for (double b : x) p += std::exp(-(a - b) * (a - b) / (2.0 * h * h)) / (h * std::sqrt(2.0 * oracle::kPi));
    total += std::log(p / n);
  }
  return -total / n;
}

}  // namespace

TEST_CASE("KDE entropy") {
  CHECK(pm::kde_entropy(std::vector<double>{5.0}) == 0.0);
  CHECK(pm::kde_entropy(std::vector<double>{5.0, 5.0, 5.0}) == 0.0);
  CHECK_THROWS_AS(pm::kde_entropy(std::vector<double>{}), std::invalid_argument);

  const std::vector<double> three{90.0, 100.0, 110.0};
  CHECK(pm::median(three) == 100.0);
  CHECK(pm::kde_entropy(three) == doctest::Approx(std::max(0.0, resubstitution_entropy(three))).epsilon(1e-12));

  std::vector<double> spread;
  for (int k = 0; k < 100; ++k) spread.push_back(2.0 + 4.0 * k);
  CHECK(pm::kde_entropy(spread) == doctest::Approx(resubstitution_entropy(spread)).epsilon(1e-12));
  CHECK(std::abs(pm::kde_entropy(spread) - std::log(400.0)) < 0.15 * std::log(400.0));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(2 + trial % 20);
    for (auto& v : x) v = rng.uniform(0.0, 400.0);
    CHECK(pm::kde_entropy(x) >= 0.0);
    CHECK(pm::kde_entropy(x) == doctest::Approx(std::max(0.0, resubstitution_entropy(x))).epsilon(1e-10));
  }
}

TEST_CASE("median of even and odd samples") {
  CHECK(pm::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(pm::median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(pm::median({}), std::invalid_argument);
}

TEST_CASE("motion statistics of a run") {
  const std::vector<GeoPoint> pts{{47.0, -64.0}, {47.1, -63.9}, {47.2, -63.8}};
  const std::vector<double> bearings{50.0, 60.0, 70.0};
  const auto s = pm::motion_statistics(pts, bearings);
  CHECK(s.l_first == pts.front());
  CHECK(s.l_last == pts.back());
  CHECK(s.theta_median == 60.0);
  CHECK(s.theta_entropy == doctest::Approx(std::max(0.0, resubstitution_entropy(bearings))));
  CHECK_THROWS_AS(pm::motion_statistics(std::vector<GeoPoint>{}, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(pm::motion_statistics(pts, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("statistics distance") {
  pm::Components zero{}, one{};
  one.fill(1.0);
  CHECK(pm::stat_distance(zero, zero) == 0.0);
  CHECK(pm::stat_distance(zero, one) == doctest::Approx(2.0));

  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    pm::Components a{}, b{}, c{};
    for (std::size_t k = 0; k < pm::kComponents; ++k) {
      a[k] = rng.uniform();
      b[k] = rng.uniform();
      c[k] = rng.uniform();
    }
    // Group form: mean squared coordinate gap per position, plus the scalar terms.
    const double first = ((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])) / 2.0;
    const double last = ((a[2] - b[2]) * (a[2] - b[2]) + (a[3] - b[3]) * (a[3] - b[3])) / 2.0;
    const double expected = std::sqrt(first + last + (a[4] - b[4]) * (a[4] - b[4]) + (a[5] - b[5]) * (a[5] - b[5]));
    CHECK(pm::stat_distance(a, b) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(pm::stat_distance(a, b) == pm::stat_distance(b, a));
    CHECK(pm::stat_distance(a, c) <= pm::stat_distance(a, b) + pm::stat_distance(b, c) + 1e-12);
    CHECK(pm::stat_distance(a, b) <= 2.0);
  }
}

TEST_CASE("normalization clamps and handles flat components") {
  pm::Norms n = pm::Norms::empty();
  n.extend({{47.0, -64.0}, {47.0, -63.0}, 100.0, 1.0});
  n.extend({{48.0, -64.0}, {47.5, -62.0}, 300.0, 1.0});
  const auto c = n.normalize({{47.5, -64.0}, {49.0, -60.0}, 0.0, 1.0});
  CHECK(c[0] == 0.5);
  CHECK(c[1] == 0.0);  // flat longitude
  CHECK(c[2] == 1.0);  // clamped above
  CHECK(c[3] == 1.0);
  CHECK(c[4] == 0.0);  // clamped below
  CHECK(c[5] == 0.0);
}

TEST_CASE("store entries match a per-track count") {
  const auto& f = fixture();
  const auto cells = oracle::build_cells(f.train, f.grid, f.world.routes);
  std::size_t total = 0;
  for (const auto& [id, c] : cells) {
    const auto* h = f.store.history(id);
    REQUIRE(h != nullptr);
    REQUIRE(h->entries.size() == c.entries.size());
    total += c.entries.size();
    CHECK(h->delta == c.delta);
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
      const auto& e = h->entries[i];
      CHECK(e.track_id == c.entries[i].track_id);
      CHECK(e.dest_cell == c.entries[i].dest);
      CHECK(std::set<int>(e.routes.begin(), e.routes.end()) == c.entries[i].routes);
      CHECK(pm::components(e.stats) == c.entries[i].raw);
      for (std::size_t k = 0; k < pm::kComponents; ++k) CHECK(e.normalized[k] == c.entries[i].norm[k]);
    }
  }
  CHECK(f.store.entry_count() == total);
  for (const auto& [id, c] : cells) {
    for (int r : route_ids(f)) {
      std::size_t n = 0;
      for (const auto& e : c.entries) n += e.routes.count(r);
      CHECK(f.store.route_entries(id, r).size() == n);
    }
  }
}

TEST_CASE("queries equal brute-force enumeration") {
  const auto& f = fixture();
  const auto cells = oracle::build_cells(f.train, f.grid, f.world.routes);
  const auto ids = route_ids(f);
  std::size_t queries = 0;
  for (const auto& t : f.test) {
    std::set<int> visited;
    for (const auto& p : t.points) {
      if (const auto c = f.grid.locate(p.pos)) visited.insert(*c);
    }
    for (int cell : visited) {
      const auto it = cells.find(cell);
      if (it == cells.end()) continue;
      const auto s = pm::motion_statistics(t, f.grid, cell);
      const auto want = oracle::answer(it->second, s, ids);
      const pm::CellQuery q(f.store, cell, s);
      for (const auto& [r, p] : want.p_route) CHECK(q.p_route(r) == p);
      for (const auto& [rd, p] : want.p_dest_given_route) CHECK(q.p_dest_given_route(rd.first, rd.second) == p);
      for (const auto& [d, p] : want.p_dest) CHECK(q.p_dest(d) == p);
      const auto got = q.possible_destinations(want.possible.size() + 3);
      CHECK(got == want.possible);
      ++queries;
    }
  }
  CHECK(queries > 100);
}

TEST_CASE("probabilities partition over destinations") {
  const auto& f = fixture();
  const auto ids = route_ids(f);
  for (const auto& t : f.test) {
    const int cell = *f.grid.locate(t.points[t.points.size() / 2].pos);
    const pm::CellQuery q(f.store, cell, pm::motion_statistics(t, f.grid, cell));
    if (q.similar_count() == 0) continue;
    std::set<int> dests;
    for (const auto& e : q.history()->entries) dests.insert(e.dest_cell);
    double total = 0.0;
    for (int d : dests) total += q.p_dest(d);
    CHECK(total == doctest::Approx(1.0));
    double routed = 0.0;
    for (int r : ids) {
      routed += q.p_route(r);
      if (q.p_route(r) == 0.0) continue;
      double given = 0.0;
      for (int d : dests) given += q.p_dest_given_route(r, d);
      CHECK(given == doctest::Approx(1.0));
    }
    // Every fork-world track crosses exactly one polygon.
    CHECK(routed == doctest::Approx(1.0));
  }
}

TEST_CASE("possible destinations validates k and trims") {
  const auto& f = fixture();
  const auto& t = f.test.front();
  const int cell = *f.grid.locate(t.points.front().pos);
  const auto s = pm::motion_statistics(t, f.grid, cell);
  CHECK_THROWS_AS(pm::possible_destinations(f.store, cell, s, 0), std::invalid_argument);
  CHECK(pm::possible_destinations(f.store, cell, s, 1).size() == 1);
  const pm::CellQuery empty(f.store, static_cast<int>(f.grid.cell_count()) + 5, s);
  CHECK_FALSE(empty.has_history());
  CHECK(empty.possible_destinations(3).empty());
  CHECK(empty.score_destination().empty());
  CHECK(empty.score_route().id == -1);
}

TEST_CASE("training tracks recover their own destination") {
  const auto& f = fixture();
  std::size_t total = 0, hits = 0;
  for (std::size_t k = 0; k < f.train.size(); k += 7) {
    const auto& t = f.train[k];
    const auto truth = pm::track_truth(t, f.grid, f.world.routes);
    std::set<int> visited;
    for (const auto& p : t.points) visited.insert(*f.grid.locate(p.pos));
    for (int cell : visited) {
      const auto ranked = pm::score_destination(f.store, cell, pm::motion_statistics(t, f.grid, cell));
      ++total;
      hits += !ranked.empty() && ranked.front().first == truth.dest_cell;
    }
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("binary round trip is exact") {
  const auto& f = fixture();
  std::stringstream buf;
  f.store.write(buf);
  const auto back = pm::ProbabilityStore::read(buf);
  CHECK(back == f.store);
  std::stringstream again;
  back.write(again);
  std::stringstream first;
  f.store.write(first);
  CHECK(again.str() == first.str());

  std::stringstream bad("probstore.v0xxxxxxxx");
  CHECK_THROWS_AS(pm::ProbabilityStore::read(bad), std::runtime_error);
  std::stringstream cut(first.str().substr(0, first.str().size() / 2));
  CHECK_THROWS_AS(pm::ProbabilityStore::read(cut), std::runtime_error);
}

TEST_CASE("build_store rejects an empty corpus") {
  const auto& f = fixture();
  CHECK_THROWS_AS(pm::build_store(std::vector<ingest::Track>{}, f.grid, f.world.routes), std::invalid_argument);
}

TEST_CASE("emitted features per message") {
  const auto& f = fixture();
  for (std::size_t k = 0; k < f.test.size(); k += 5) {
    const auto& t = f.test[k];
    const auto rows = pm::emit_probabilistic_features(f.store, f.grid, f.world.routes, t);
    REQUIRE(rows.size() == t.points.size());
    std::optional<int> committed;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto cell = *f.grid.locate(t.points[i].pos);
      CHECK(rows[i].current_cell == cell);
      CHECK(rows[i].cell == f.grid.centroid(cell));
      if (rows[i].dest_cell >= 0) CHECK(rows[i].dest == f.grid.centroid(rows[i].dest_cell));
      if (const auto r = grid::which_route(f.world.routes, t.points[i].pos)) committed = *r;
      if (committed) {
        CHECK(rows[i].route_id == *committed);
        CHECK(rows[i].route == grid::route_by_id(f.world.routes, *committed).centroid);
      }
    }
    CHECK(rows.back().dest_cell == pm::track_truth(t, f.grid, f.world.routes).dest_cell);
  }
}

TEST_CASE("emission is causal") {
  const auto& f = fixture();
  const auto& t = f.test.front();
  const auto full = pm::emit_probabilistic_features(f.store, f.grid, f.world.routes, t);
  ingest::Track prefix = t;
  prefix.points.resize(t.points.size() / 2);
  const auto part = pm::emit_probabilistic_features(f.store, f.grid, f.world.routes, prefix);
  for (std::size_t i = 0; i < part.size(); ++i) {
    CHECK(part[i].route == full[i].route);
    CHECK(part[i].dest == full[i].dest);
    CHECK(part[i].route_id == full[i].route_id);
  }
}

TEST_CASE("messages outside the grid repeat the previous row") {
  const auto& f = fixture();
  ingest::Track t = f.test.front();
  ingest::TrackPoint off = t.points.back();
  off.pos = {f.world.bbox.lat_max + 1.0, off.pos.lon};
  off.timestamp += 600;
  t.points.push_back(off);
  const auto rows = pm::emit_probabilistic_features(f.store, f.grid, f.world.routes, t);
  const auto& a = rows[rows.size() - 2];
  const auto& b = rows.back();
  CHECK(b.fallback);
  CHECK(b.current_cell == -1);
  CHECK(b.route == a.route);
  CHECK(b.dest == a.dest);
  CHECK(b.cell == a.cell);
}

TEST_CASE("non-sticky emission follows the scorer") {
  const auto& f = fixture();
  const auto& t = f.test.front();
  const auto rows = pm::emit_probabilistic_features(f.store, f.grid, f.world.routes, t, {.sticky_routes = false});
  REQUIRE(rows.size() == t.points.size());
  for (const auto& r : rows) {
    if (r.route_id >= 0) {
      CHECK(r.route_dest == -1);
      CHECK(r.route == grid::route_by_id(f.world.routes, r.route_id).centroid);
    } else if (r.route_dest >= 0) {
      CHECK(r.route == f.grid.centroid(r.route_dest));
    }
  }
}
