#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "voyagecast/grid.hpp"
#include "voyagecast/ingest.hpp"

namespace voyagecast::probmodel {

using geo::GeoPoint;

/// How a track moved through one cell: first and last in-cell positions,
/// median bearing (gradians) and the KDE entropy of the bearings (nats).
struct MotionStatistics {
  GeoPoint l_first;
  GeoPoint l_last;
  double theta_median = 0.0;
  double theta_entropy = 0.0;

  friend bool operator==(const MotionStatistics&, const MotionStatistics&) = default;
};

inline constexpr std::size_t kComponents = 6;
using Components = std::array<double, kComponents>;

/// (lat_f, lon_f, lat_e, lon_e, theta, entropy).
Components components(const MotionStatistics& s);

/// Per-component min/max used to map statistics into [0, 1].
struct Norms {
  Components lo{};
  Components hi{};

  /// Starts empty; extend() widens it.
  static Norms empty();
  void extend(const MotionStatistics& s);
  Components normalize(const MotionStatistics& s) const;
};

/// Gaussian-KDE resubstitution entropy -mean(log p(x_i)) with Scott's
/// bandwidth (sample std * n^-1/5). Returns 0 for n < 2 or zero variance,
/// and never below 0. Throws std::invalid_argument on empty input.
double kde_entropy(std::span<const double> values);

double median(std::vector<double> values);

/// Statistics of an ordered run of in-cell points and their bearings.
/// Throws std::invalid_argument when empty.
MotionStatistics motion_statistics(std::span<const GeoPoint> points, std::span<const double> bearings);

/// Statistics over every point of `track` that lies in `cell`. Throws
/// std::invalid_argument when the track never enters the cell.
MotionStatistics motion_statistics(const ingest::Track& track, const grid::HexGrid& grid, int cell);

/// Euclidean distance of normalized statistics. Each coordinate pair
/// contributes the mean of its squared lat/lon differences, so every group
/// lies in [0, 1] and the distance in [0, 2]. Components whose min equals
/// max contribute 0.
double stat_distance(const MotionStatistics& a, const MotionStatistics& b, const Norms& norms);
double stat_distance(const Components& a, const Components& b);

/// One historical track's footprint in one cell.
struct Entry {
  std::int64_t track_id = 0;
  MotionStatistics stats;
  int dest_cell = -1;
  std::vector<int> routes;  // ascending ids of all polygons the track crosses
  Components normalized{};

  bool crosses(int route) const;
};

struct CellHistory {
  int cell = -1;
  std::vector<Entry> entries;  // ascending track id
  Norms norms;
  double delta = 0.0;  // first quartile of pairwise distances
};

struct StoreOptions {
  double delta_quantile = 0.25;
};

/// Per-cell motion histories. M[c][r] and M~[c][d] are views over the
/// same entries, selected by route crossing or destination.
class ProbabilityStore {
 public:
  ProbabilityStore() = default;
  ProbabilityStore(std::size_t cell_count, std::vector<int> route_ids, StoreOptions opts);

  const CellHistory* history(int cell) const;
  std::size_t cell_count() const { return cells_.size(); }
  const std::vector<int>& route_ids() const { return route_ids_; }
  const StoreOptions& options() const { return opts_; }

  std::vector<const Entry*> route_entries(int cell, int route) const;  // M
  std::vector<const Entry*> dest_entries(int cell, int dest) const;    // M~
  std::size_t entry_count() const;

  void write(std::ostream& out) const;
  static ProbabilityStore read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static ProbabilityStore load(const std::filesystem::path& path);

  friend ProbabilityStore build_store(std::span<const ingest::Track>, const grid::HexGrid&,
                                      std::span<const grid::RoutePolygon>, const StoreOptions&);
  friend bool operator==(const ProbabilityStore& a, const ProbabilityStore& b);

 private:
  std::vector<CellHistory> cells_;  // indexed by cell id; empty histories allowed
  std::vector<int> route_ids_;
  StoreOptions opts_;
};

bool operator==(const ProbabilityStore& a, const ProbabilityStore& b);

/// Throws std::invalid_argument for an empty corpus.
ProbabilityStore build_store(std::span<const ingest::Track> tracks, const grid::HexGrid& grid,
                             std::span<const grid::RoutePolygon> routes, const StoreOptions& opts = {});

/// Distances from one new track's statistics to every entry of a cell,
/// computed once and shared by all the queries below.
class CellQuery {
 public:
  CellQuery(const ProbabilityStore& store, int cell, const MotionStatistics& s_new);

  bool has_history() const { return hist_ != nullptr && !hist_->entries.empty(); }
  const CellHistory* history() const { return hist_; }
  const std::vector<double>& distances() const { return dist_; }
  bool similar(std::size_t i) const { return dist_[i] <= hist_->delta; }
  std::size_t similar_count() const;

  double p_route(int route) const;
  double p_dest_given_route(int route, int dest) const;
  double p_dest(int dest) const;

  /// 1 - smallest distance among similar entries satisfying pred, in [0, 1].
  template <typename Pred>
  double xi(Pred pred) const;

  double route_score(int route) const;

  /// Ranked (dest, score), best first, ties by ascending id.
  std::vector<std::pair<int, double>> score_destination() const;

  struct RouteChoice {
    int id = -1;
    double score = 0.0;
    bool is_route = false;
  };
  RouteChoice score_route() const;

  /// Algorithm "possible destinations": ascending (dest, score), top k.
  std::vector<std::pair<int, double>> possible_destinations(std::size_t k) const;

 private:
  const ProbabilityStore* store_ = nullptr;
  const CellHistory* hist_ = nullptr;
  std::vector<double> dist_;
};

double p_route(const ProbabilityStore& store, int cell, const MotionStatistics& s_new, int route);
double p_dest_given_route(const ProbabilityStore& store, int cell, int route, const MotionStatistics& s_new,
                          int dest);
double p_dest(const ProbabilityStore& store, int cell, const MotionStatistics& s_new, int dest);
std::vector<std::pair<int, double>> score_destination(const ProbabilityStore& store, int cell,
                                                      const MotionStatistics& s_new);
CellQuery::RouteChoice score_route(const ProbabilityStore& store, int cell, const MotionStatistics& s_new);
/// Throws std::invalid_argument for k == 0.
std::vector<std::pair<int, double>> possible_destinations(const ProbabilityStore& store, int cell,
                                                          const MotionStatistics& s_new, std::size_t k);

struct ProbFeatures {
  GeoPoint route;  // L^R
  GeoPoint cell;   // L^N
  GeoPoint dest;   // L^D
  int route_id = -1;       // predicted polygon, -1 when none
  int route_dest = -1;     // destination used for L^R when no polygon is predicted
  int dest_cell = -1;      // predicted destination cell
  int current_cell = -1;   // -1 when the message is outside the grid
  bool fallback = false;   // no usable history in the current cell
};

struct EmitOptions {
  /// Once a message lies inside a route polygon, later messages keep that
  /// polygon as L^R.
  bool sticky_routes = true;
};

/// Per-message probabilistic features. Each message is scored from the
/// statistics of the messages seen so far in its current cell. When the
/// cell has no history, or no history within its similarity threshold, the
/// previous message's predictions carry over (Algorithm-1 destination or
/// the current cell for the very first message).
std::vector<ProbFeatures> emit_probabilistic_features(const ProbabilityStore& store, const grid::HexGrid& grid,
                                                      std::span<const grid::RoutePolygon> routes,
                                                      const ingest::Track& track, const EmitOptions& opts = {});

/// Ground truth for a track: the lowest polygon it crosses (-1 if none) and
/// its final cell.
struct TrackTruth {
  int route_id = -1;
  int dest_cell = -1;
};
TrackTruth track_truth(const ingest::Track& track, const grid::HexGrid& grid,
                       std::span<const grid::RoutePolygon> routes);

template <typename Pred>
double CellQuery::xi(Pred pred) const {
  double best = 2.0;
  bool any = false;
  for (std::size_t i = 0; i < dist_.size(); ++i) {
    if (similar(i) && pred(hist_->entries[i])) {
      best = std::min(best, dist_[i]);
      any = true;
    }
  }
  if (!any) return 0.0;
  return std::clamp(1.0 - best, 0.0, 1.0);
}

}  // namespace voyagecast::probmodel
