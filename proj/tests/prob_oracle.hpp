#pragma once

// Brute-force enumeration of the per-cell probability queries. It rebuilds
// every cell's entry list straight from the tracks, sorts all pairwise
// distances to find the similarity threshold, and answers each query by
// walking the whole list.

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "voyagecast/geometry.hpp"
#include "voyagecast/grid.hpp"
#include "voyagecast/ingest.hpp"
#include "voyagecast/probmodel.hpp"

namespace oracle {

namespace pm = voyagecast::probmodel;

struct OracleEntry {
  std::int64_t track_id = 0;
  int dest = -1;
  std::set<int> routes;
  pm::MotionStatistics stats;
  std::array<double, 6> raw{};
  std::array<double, 6> norm{};
};

struct OracleCell {
  std::vector<OracleEntry> entries;
  std::array<double, 6> lo{}, hi{};
  double delta = 0.0;
};

inline std::array<double, 6> raw_components(const pm::MotionStatistics& s) {
  return {s.l_first.lat, s.l_first.lon, s.l_last.lat, s.l_last.lon, s.theta_median, s.theta_entropy};
}

inline std::array<double, 6> normalize(const OracleCell& c, const std::array<double, 6>& raw) {
  std::array<double, 6> out{};
  for (int k = 0; k < 6; ++k) {
    const double span = c.hi[k] - c.lo[k];
    out[k] = span > 0.0 ? std::clamp((raw[k] - c.lo[k]) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

/// Same weighting as the library metric: half weight on each coordinate pair.
inline double distance(const std::array<double, 6>& a, const std::array<double, 6>& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2], d3 = a[3] - b[3];
  const double d4 = a[4] - b[4], d5 = a[5] - b[5];
  return std::sqrt(0.5 * (d0 * d0 + d1 * d1) + 0.5 * (d2 * d2 + d3 * d3) + d4 * d4 + d5 * d5);
}

/// Every track's in-cell run, keyed by cell. Tracks whose last point is off
/// the grid contribute nothing.
inline std::map<int, OracleCell> build_cells(const std::vector<voyagecast::ingest::Track>& tracks,
                                             const voyagecast::grid::HexGrid& grid,
                                             const std::vector<voyagecast::grid::RoutePolygon>& routes,
                                             double q = 0.25) {
  std::map<int, OracleCell> cells;
  for (const auto& t : tracks) {
    if (t.points.empty()) continue;
    const auto dest = grid.locate(t.points.back().pos);
    if (!dest) continue;
    std::set<int> crossed;
    for (const auto& p : t.points) {
      for (const auto& r : routes) {
        if (voyagecast::geometry::point_in_polygon(r.ring, p.pos)) crossed.insert(r.id);
      }
    }
    std::set<int> visited;
    for (const auto& p : t.points) {
      if (const auto c = grid.locate(p.pos)) visited.insert(*c);
    }
    for (int c : visited) {
      OracleEntry e;
      e.track_id = t.track_id;
      e.dest = *dest;
      e.routes = crossed;
      e.stats = pm::motion_statistics(t, grid, c);
      e.raw = raw_components(e.stats);
      cells[c].entries.push_back(e);
    }
  }
  for (auto& [id, c] : cells) {
    std::sort(c.entries.begin(), c.entries.end(),
              [](const OracleEntry& a, const OracleEntry& b) { return a.track_id < b.track_id; });
    c.lo.fill(1e300);
    c.hi.fill(-1e300);
    for (const auto& e : c.entries) {
      for (int k = 0; k < 6; ++k) {
        c.lo[k] = std::min(c.lo[k], e.raw[k]);
        c.hi[k] = std::max(c.hi[k], e.raw[k]);
      }
    }
    for (auto& e : c.entries) e.norm = normalize(c, e.raw);
    std::vector<double> pairs;
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
      for (std::size_t j = i + 1; j < c.entries.size(); ++j) {
        pairs.push_back(distance(c.entries[i].norm, c.entries[j].norm));
      }
    }
    c.delta = pairs.empty() ? 0.0 : percentile(pairs, q);
  }
  return cells;
}

struct QueryAnswer {
  std::map<int, double> p_route;
  std::map<std::pair<int, int>, double> p_dest_given_route;
  std::map<int, double> p_dest;
  std::vector<std::pair<int, double>> possible;  // all retained, ascending
};

inline QueryAnswer answer(const OracleCell& c, const pm::MotionStatistics& s_new, const std::vector<int>& route_ids) {
  QueryAnswer a;
  const auto q = normalize(c, raw_components(s_new));
  std::vector<double> d;
  for (const auto& e : c.entries) d.push_back(distance(q, e.norm));
  std::set<int> dests;
  for (const auto& e : c.entries) dests.insert(e.dest);

  auto ratio = [](int num, int den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; };
  int similar = 0;
  for (double x : d) similar += x <= c.delta;
  for (int r : route_ids) {
    int hits = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] <= c.delta && c.entries[i].routes.count(r)) ++hits;
    }
    a.p_route[r] = ratio(hits, similar);
    for (int dest : dests) {
      int both = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] <= c.delta && c.entries[i].routes.count(r) && c.entries[i].dest == dest) ++both;
      }
      a.p_dest_given_route[{r, dest}] = ratio(both, hits);
    }
  }
  for (int dest : dests) {
    int hits = 0;
    for (std::size_t i = 0; i < d.size(); ++i) hits += d[i] <= c.delta && c.entries[i].dest == dest;
    a.p_dest[dest] = ratio(hits, similar);
  }

  std::vector<std::pair<int, double>> mins;
  for (int dest : dests) {
    double m = 1e300;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (c.entries[i].dest == dest) m = std::min(m, d[i]);
    }
    mins.emplace_back(dest, m);
  }
  double mean = 0.0;
  for (const auto& [dest, m] : mins) mean += m;
  mean /= static_cast<double>(mins.size());
  for (const auto& [dest, m] : mins) {
    if (m > mean) continue;
    int n = 0;
    for (const auto& e : c.entries) n += e.dest == dest;
    a.possible.emplace_back(dest, m * (1.0 - static_cast<double>(n) / static_cast<double>(c.entries.size())));
  }
  std::sort(a.possible.begin(), a.possible.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second < y.second : x.first < y.first;
  });
  return a;
}

}  // namespace oracle
