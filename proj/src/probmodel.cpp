#include "voyagecast/probmodel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>

#include "voyagecast/parallel.hpp"

namespace voyagecast::probmodel {

namespace {

constexpr char kMagic[] = "probstore.v1";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated probability store");
  return v;
}

/// Linear-interpolation quantile; reorders `v`.
double quantile(std::vector<double>& v, double q) {
  if (v.empty()) return 0.0;
  const double rank = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (rank - static_cast<double>(lo)) * (b - a);
}

void finalize_cell(CellHistory& h, double q) {
  h.norms = Norms::empty();
  for (const auto& e : h.entries) h.norms.extend(e.stats);
  for (auto& e : h.entries) e.normalized = h.norms.normalize(e.stats);
  const std::size_t n = h.entries.size();
  if (n < 2) {
    h.delta = 0.0;
    return;
  }
  std::vector<double> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pairs.push_back(stat_distance(h.entries[i].normalized, h.entries[j].normalized));
    }
  }
  h.delta = quantile(pairs, q);
}

std::vector<int> crossed_routes(const ingest::Track& track, std::span<const grid::RoutePolygon> routes) {
  std::set<int> ids;
  for (const auto& p : track.points) {
    for (int r : grid::routes_containing(routes, p.pos)) ids.insert(r);
  }
  return {ids.begin(), ids.end()};
}

}  // namespace

Components components(const MotionStatistics& s) {
  return {s.l_first.lat, s.l_first.lon, s.l_last.lat, s.l_last.lon, s.theta_median, s.theta_entropy};
}

Norms Norms::empty() {
  Norms n;
  n.lo.fill(std::numeric_limits<double>::infinity());
  n.hi.fill(-std::numeric_limits<double>::infinity());
  return n;
}

void Norms::extend(const MotionStatistics& s) {
  const Components c = components(s);
  for (std::size_t k = 0; k < kComponents; ++k) {
    lo[k] = std::min(lo[k], c[k]);
    hi[k] = std::max(hi[k], c[k]);
  }
}

Components Norms::normalize(const MotionStatistics& s) const {
  const Components c = components(s);
  Components out{};
  for (std::size_t k = 0; k < kComponents; ++k) {
    const double span = hi[k] - lo[k];
    out[k] = span > 0.0 ? std::clamp((c[k] - lo[k]) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

double kde_entropy(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("entropy of an empty sample");
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) return 0.0;
  const double h = sd * std::pow(static_cast<double>(n), -0.2);
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * geo::kPi));
  double acc = 0.0;
  for (double x : values) {
    double density = 0.0;
    for (double y : values) {
      const double u = (x - y) / h;
      density += std::exp(-0.5 * u * u);
    }
    acc += std::log(density * norm);
  }
  return std::max(0.0, -acc / static_cast<double>(n));
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MotionStatistics motion_statistics(std::span<const GeoPoint> points, std::span<const double> bearings) {
  if (points.empty() || points.size() != bearings.size()) {
    throw std::invalid_argument("motion statistics need matching non-empty points and bearings");
  }
  MotionStatistics s;
  s.l_first = points.front();
  s.l_last = points.back();
  s.theta_median = median({bearings.begin(), bearings.end()});
  s.theta_entropy = kde_entropy(bearings);
  return s;
}

MotionStatistics motion_statistics(const ingest::Track& track, const grid::HexGrid& grid, int cell) {
  std::vector<GeoPoint> pts;
  std::vector<double> bearings;
  for (const auto& p : track.points) {
    if (grid.locate(p.pos) == cell) {
      pts.push_back(p.pos);
      bearings.push_back(p.kin.theta);
    }
  }
  if (pts.empty()) throw std::invalid_argument("track has no point in cell " + std::to_string(cell));
  return motion_statistics(pts, bearings);
}

double stat_distance(const Components& a, const Components& b) {
  const double dlf0 = a[0] - b[0], dlf1 = a[1] - b[1];
  const double dle0 = a[2] - b[2], dle1 = a[3] - b[3];
  const double dt = a[4] - b[4], dp = a[5] - b[5];
  return std::sqrt(0.5 * (dlf0 * dlf0 + dlf1 * dlf1) + 0.5 * (dle0 * dle0 + dle1 * dle1) + dt * dt + dp * dp);
}

double stat_distance(const MotionStatistics& a, const MotionStatistics& b, const Norms& norms) {
  return stat_distance(norms.normalize(a), norms.normalize(b));
}

bool Entry::crosses(int route) const { return std::binary_search(routes.begin(), routes.end(), route); }

ProbabilityStore::ProbabilityStore(std::size_t cell_count, std::vector<int> route_ids, StoreOptions opts)
    : cells_(cell_count), route_ids_(std::move(route_ids)), opts_(opts) {
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    cells_[c].cell = static_cast<int>(c);
    cells_[c].norms = Norms::empty();
  }
}

const CellHistory* ProbabilityStore::history(int cell) const {
  if (cell < 0 || static_cast<std::size_t>(cell) >= cells_.size()) return nullptr;
  return &cells_[static_cast<std::size_t>(cell)];
}

std::vector<const Entry*> ProbabilityStore::route_entries(int cell, int route) const {
  std::vector<const Entry*> out;
  if (const auto* h = history(cell)) {
    for (const auto& e : h->entries) {
      if (e.crosses(route)) out.push_back(&e);
    }
  }
  return out;
}

std::vector<const Entry*> ProbabilityStore::dest_entries(int cell, int dest) const {
  std::vector<const Entry*> out;
  if (const auto* h = history(cell)) {
    for (const auto& e : h->entries) {
      if (e.dest_cell == dest) out.push_back(&e);
    }
  }
  return out;
}

std::size_t ProbabilityStore::entry_count() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += c.entries.size();
  return n;
}

ProbabilityStore build_store(std::span<const ingest::Track> tracks, const grid::HexGrid& grid,
                             std::span<const grid::RoutePolygon> routes, const StoreOptions& opts) {
  if (tracks.empty()) throw std::invalid_argument("cannot build a store from an empty corpus");
  std::vector<int> route_ids;
  for (const auto& r : routes) route_ids.push_back(r.id);
  std::sort(route_ids.begin(), route_ids.end());
  ProbabilityStore store(grid.cell_count(), route_ids, opts);

  std::vector<std::vector<std::pair<int, Entry>>> per_track(tracks.size());
  parallel_for(tracks.size(), [&](std::size_t t) {
    const auto& track = tracks[t];
    if (track.points.empty()) return;
    const auto dest = grid.locate(track.points.back().pos);
    if (!dest) return;
    const auto crossed = crossed_routes(track, routes);
    std::map<int, std::pair<std::vector<GeoPoint>, std::vector<double>>> in_cell;
    for (const auto& p : track.points) {
      if (const auto c = grid.locate(p.pos)) {
        auto& slot = in_cell[*c];
        slot.first.push_back(p.pos);
        slot.second.push_back(p.kin.theta);
      }
    }
    for (const auto& [cell, run] : in_cell) {
      Entry e;
      e.track_id = track.track_id;
      e.stats = motion_statistics(run.first, run.second);
      e.dest_cell = *dest;
      e.routes = crossed;
      per_track[t].emplace_back(cell, std::move(e));
    }
  });

  for (auto& entries : per_track) {
    for (auto& [cell, e] : entries) store.cells_[static_cast<std::size_t>(cell)].entries.push_back(std::move(e));
  }
  parallel_for(store.cells_.size(), [&](std::size_t c) {
    auto& h = store.cells_[c];
    std::stable_sort(h.entries.begin(), h.entries.end(),
                     [](const Entry& a, const Entry& b) { return a.track_id < b.track_id; });
    finalize_cell(h, opts.delta_quantile);
  });
  return store;
}

bool operator==(const ProbabilityStore& a, const ProbabilityStore& b) {
  if (a.route_ids_ != b.route_ids_ || a.opts_.delta_quantile != b.opts_.delta_quantile ||
      a.cells_.size() != b.cells_.size()) {
    return false;
  }
  for (std::size_t c = 0; c < a.cells_.size(); ++c) {
    const auto& x = a.cells_[c];
    const auto& y = b.cells_[c];
    if (x.entries.size() != y.entries.size() || x.delta != y.delta || x.norms.lo != y.norms.lo ||
        x.norms.hi != y.norms.hi) {
      return false;
    }
    for (std::size_t i = 0; i < x.entries.size(); ++i) {
      const auto& e = x.entries[i];
      const auto& f = y.entries[i];
      if (e.track_id != f.track_id || !(e.stats == f.stats) || e.dest_cell != f.dest_cell ||
          e.routes != f.routes || e.normalized != f.normalized) {
        return false;
      }
    }
  }
  return true;
}

void ProbabilityStore::write(std::ostream& out) const {
  out.write(kMagic, kMagicLen);
  put<std::uint64_t>(out, cells_.size());
  put<double>(out, opts_.delta_quantile);
  put<std::uint64_t>(out, route_ids_.size());
  for (int r : route_ids_) put<std::int32_t>(out, r);
  std::uint64_t non_empty = 0;
  for (const auto& c : cells_) non_empty += !c.entries.empty();
  put<std::uint64_t>(out, non_empty);
  for (const auto& c : cells_) {
    if (c.entries.empty()) continue;
    put<std::int32_t>(out, c.cell);
    put<double>(out, c.delta);
    for (double v : c.norms.lo) put<double>(out, v);
    for (double v : c.norms.hi) put<double>(out, v);
    put<std::uint64_t>(out, c.entries.size());
    for (const auto& e : c.entries) {
      put<std::int64_t>(out, e.track_id);
      put<std::int32_t>(out, e.dest_cell);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(e.routes.size()));
      for (int r : e.routes) put<std::int32_t>(out, r);
      for (double v : components(e.stats)) put<double>(out, v);
      for (double v : e.normalized) put<double>(out, v);
    }
  }
}

ProbabilityStore ProbabilityStore::read(std::istream& in) {
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw std::runtime_error("not a probstore.v1 artifact (schema version mismatch)");
  }
  const auto cell_count = get<std::uint64_t>(in);
  StoreOptions opts;
  opts.delta_quantile = get<double>(in);
  std::vector<int> routes(get<std::uint64_t>(in));
  for (auto& r : routes) r = get<std::int32_t>(in);
  ProbabilityStore store(cell_count, routes, opts);
  const auto non_empty = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < non_empty; ++k) {
    const auto cell = get<std::int32_t>(in);
    if (cell < 0 || static_cast<std::uint64_t>(cell) >= cell_count) {
      throw std::runtime_error("probability store cell id out of range");
    }
    CellHistory& h = store.cells_[static_cast<std::size_t>(cell)];
    h.delta = get<double>(in);
    for (auto& v : h.norms.lo) v = get<double>(in);
    for (auto& v : h.norms.hi) v = get<double>(in);
    h.entries.resize(get<std::uint64_t>(in));
    for (auto& e : h.entries) {
      e.track_id = get<std::int64_t>(in);
      e.dest_cell = get<std::int32_t>(in);
      e.routes.resize(get<std::uint32_t>(in));
      for (auto& r : e.routes) r = get<std::int32_t>(in);
      Components c{};
      for (auto& v : c) v = get<double>(in);
      e.stats = {{c[0], c[1]}, {c[2], c[3]}, c[4], c[5]};
      for (auto& v : e.normalized) v = get<double>(in);
    }
  }
  return store;
}

void ProbabilityStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
}

ProbabilityStore ProbabilityStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read(in);
}

CellQuery::CellQuery(const ProbabilityStore& store, int cell, const MotionStatistics& s_new)
    : store_(&store), hist_(store.history(cell)) {
  if (!hist_) return;
  const Components q = hist_->norms.normalize(s_new);
  dist_.reserve(hist_->entries.size());
  for (const auto& e : hist_->entries) dist_.push_back(stat_distance(q, e.normalized));
}

std::size_t CellQuery::similar_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < dist_.size(); ++i) n += similar(i);
  return n;
}

double CellQuery::p_route(int route) const {
  std::size_t num = 0, den = 0;
  for (std::size_t i = 0; i < dist_.size(); ++i) {
    if (!similar(i)) continue;
    ++den;
    num += hist_->entries[i].crosses(route);
  }
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double CellQuery::p_dest_given_route(int route, int dest) const {
  std::size_t num = 0, den = 0;
  for (std::size_t i = 0; i < dist_.size(); ++i) {
    if (!similar(i) || !hist_->entries[i].crosses(route)) continue;
    ++den;
    num += hist_->entries[i].dest_cell == dest;
  }
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double CellQuery::p_dest(int dest) const {
  std::size_t num = 0, den = 0;
  for (std::size_t i = 0; i < dist_.size(); ++i) {
    if (!similar(i)) continue;
    ++den;
    num += hist_->entries[i].dest_cell == dest;
  }
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double CellQuery::route_score(int route) const {
  return xi([route](const Entry& e) { return e.crosses(route); }) * p_route(route);
}

namespace {

std::vector<std::pair<int, double>> rank_desc(std::vector<std::pair<int, double>> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return v;
}

}  // namespace

std::vector<std::pair<int, double>> CellQuery::score_destination() const {
  std::vector<std::pair<int, double>> out;
  if (!has_history()) return out;
  int best_route = -1;
  double best_score = 0.0;
  for (int r : store_->route_ids()) {
    const double s = route_score(r);
    if (s > best_score) {
      best_score = s;
      best_route = r;
    }
  }
  std::set<int> candidates;
  for (std::size_t i = 0; i < dist_.size(); ++i) {
    if (!similar(i)) continue;
    if (best_route >= 0 && !hist_->entries[i].crosses(best_route)) continue;
    candidates.insert(hist_->entries[i].dest_cell);
  }
  for (int d : candidates) {
    double s = 0.0;
    if (best_route >= 0) {
      s = xi([&](const Entry& e) { return e.crosses(best_route) && e.dest_cell == d; }) *
          p_dest_given_route(best_route, d);
    } else {
      s = xi([&](const Entry& e) { return e.dest_cell == d; }) * p_dest(d);
    }
    out.emplace_back(d, s);
  }
  return rank_desc(std::move(out));
}

CellQuery::RouteChoice CellQuery::score_route() const {
  RouteChoice best;
  if (!has_history()) return best;
  for (int r : store_->route_ids()) {
    const double s = route_score(r);
    if (s > best.score) best = {r, s, true};
  }
  if (best.is_route) return best;
  std::set<int> candidates;
  for (std::size_t i = 0; i < dist_.size(); ++i) {
    if (similar(i)) candidates.insert(hist_->entries[i].dest_cell);
  }
  for (int d : candidates) {
    const double s = xi([&](const Entry& e) { return e.dest_cell == d; }) * p_dest(d);
    if (best.id < 0 || s > best.score) best = {d, s, false};
  }
  return best;
}

std::vector<std::pair<int, double>> CellQuery::possible_destinations(std::size_t k) const {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  std::vector<std::pair<int, double>> out;
  if (!has_history()) return out;
  std::map<int, double> min_dist;
  std::map<int, std::size_t> count;
  for (std::size_t i = 0; i < dist_.size(); ++i) {
    const int d = hist_->entries[i].dest_cell;
    const auto it = min_dist.find(d);
    if (it == min_dist.end() || dist_[i] < it->second) min_dist[d] = dist_[i];
    ++count[d];
  }
  double mean = 0.0;
  for (const auto& [d, m] : min_dist) mean += m;
  mean /= static_cast<double>(min_dist.size());
  const double total = static_cast<double>(dist_.size());
  for (const auto& [d, m] : min_dist) {
    if (m <= mean) {
      const double prob = static_cast<double>(count[d]) / total;
      out.emplace_back(d, m * (1.0 - prob));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

double p_route(const ProbabilityStore& store, int cell, const MotionStatistics& s_new, int route) {
  return CellQuery(store, cell, s_new).p_route(route);
}

double p_dest_given_route(const ProbabilityStore& store, int cell, int route, const MotionStatistics& s_new,
                          int dest) {
  return CellQuery(store, cell, s_new).p_dest_given_route(route, dest);
}

double p_dest(const ProbabilityStore& store, int cell, const MotionStatistics& s_new, int dest) {
  return CellQuery(store, cell, s_new).p_dest(dest);
}

std::vector<std::pair<int, double>> score_destination(const ProbabilityStore& store, int cell,
                                                      const MotionStatistics& s_new) {
  return CellQuery(store, cell, s_new).score_destination();
}

CellQuery::RouteChoice score_route(const ProbabilityStore& store, int cell, const MotionStatistics& s_new) {
  return CellQuery(store, cell, s_new).score_route();
}

std::vector<std::pair<int, double>> possible_destinations(const ProbabilityStore& store, int cell,
                                                          const MotionStatistics& s_new, std::size_t k) {
  return CellQuery(store, cell, s_new).possible_destinations(k);
}

std::vector<ProbFeatures> emit_probabilistic_features(const ProbabilityStore& store, const grid::HexGrid& grid,
                                                      std::span<const grid::RoutePolygon> routes,
                                                      const ingest::Track& track, const EmitOptions& opts) {
  std::vector<ProbFeatures> rows;
  rows.reserve(track.points.size());
  std::optional<int> committed;
  int run_cell = -1;
  std::size_t run_start = 0;

  for (std::size_t i = 0; i < track.points.size(); ++i) {
    const auto& pt = track.points[i];
    ProbFeatures f;
    const auto cell = grid.locate(pt.pos);
    if (!cell) {
      run_cell = -1;
      if (!rows.empty()) {
        f = rows.back();
      } else {
        f.route = f.cell = f.dest = pt.pos;
      }
      f.current_cell = -1;
      f.fallback = true;
      rows.push_back(f);
      continue;
    }
    if (*cell != run_cell) {
      run_cell = *cell;
      run_start = i;
    }
    f.current_cell = *cell;
    f.cell = grid.centroid(*cell);
    if (opts.sticky_routes) {
      if (const auto r = grid::which_route(routes, pt.pos)) committed = *r;
    }

    std::vector<GeoPoint> pts;
    std::vector<double> bearings;
    for (std::size_t j = run_start; j <= i; ++j) {
      pts.push_back(track.points[j].pos);
      bearings.push_back(track.points[j].kin.theta);
    }
    const CellQuery q(store, *cell, motion_statistics(pts, bearings));

    // Defaults when nothing better is known: the previous message's
    // predictions, or the current cell itself.
    if (!rows.empty()) {
      const ProbFeatures& prev = rows.back();
      f.route = prev.route;
      f.dest = prev.dest;
      f.route_id = prev.route_id;
      f.route_dest = prev.route_dest;
      f.dest_cell = prev.dest_cell;
    } else {
      f.route = f.dest = f.cell;
    }

    if (q.has_history() && q.similar_count() > 0) {
      const auto dests = q.score_destination();
      if (!dests.empty() && dests.front().second > 0.0) {
        f.dest_cell = dests.front().first;
      } else if (const auto alg = q.possible_destinations(1); !alg.empty()) {
        f.dest_cell = alg.front().first;
      }
      const auto choice = q.score_route();
      f.route_id = choice.is_route ? choice.id : -1;
      f.route_dest = choice.is_route ? -1 : (choice.id >= 0 ? choice.id : f.dest_cell);
    } else {
      f.fallback = true;
      if (rows.empty() && q.has_history()) {
        if (const auto alg = q.possible_destinations(1); !alg.empty()) {
          f.dest_cell = alg.front().first;
          f.route_dest = f.dest_cell;
        }
      }
    }
    if (committed) {
      f.route_id = *committed;
      f.route_dest = -1;
    }
    if (f.dest_cell >= 0) f.dest = grid.centroid(f.dest_cell);
    if (f.route_id >= 0) {
      f.route = grid::route_by_id(routes, f.route_id).centroid;
    } else if (f.route_dest >= 0) {
      f.route = grid.centroid(f.route_dest);
    }
    rows.push_back(f);
  }
  return rows;
}

TrackTruth track_truth(const ingest::Track& track, const grid::HexGrid& grid,
                       std::span<const grid::RoutePolygon> routes) {
  TrackTruth t;
  const auto crossed = crossed_routes(track, routes);
  if (!crossed.empty()) t.route_id = crossed.front();
  if (!track.points.empty()) t.dest_cell = grid.locate(track.points.back().pos).value_or(-1);
  return t;
}

}  // namespace voyagecast::probmodel
