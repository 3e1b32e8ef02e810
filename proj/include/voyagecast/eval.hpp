#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace voyagecast::eval {

struct PRF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-class precision, recall and F1 averaged with weights equal to each
/// class's share of `truth`. A class never predicted has precision 0.
/// `classes` defaults to the labels present in `truth`. Throws
/// std::invalid_argument on empty or mismatched input.
PRF1 weighted_prf1(std::span<const int> truth, std::span<const int> pred, std::span<const int> classes = {});

struct Regression {
  double mae = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
};

/// MAE and MSE over all values; R^2 = 1 - SS_res / SS_tot. A constant
/// truth gives R^2 = 1 when matched exactly and 0 otherwise.
Regression regression_metrics(std::span<const double> truth, std::span<const double> pred);

using Coord = std::array<double, 2>;  // (lat, lon)

/// MAE and MSE over both coordinates; R^2 computed per coordinate and averaged.
Regression regression_metrics(std::span<const Coord> truth, std::span<const Coord> pred);

struct ErrorReport {
  double r2 = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double mean_km = 0.0;
  double p25_km = 0.0;
  double p50_km = 0.0;
  double p75_km = 0.0;
  double max_km = 0.0;
  double std_km = 0.0;  // population standard deviation
  std::vector<double> errors_km;
};

/// Linear interpolation between order statistics at rank q * (n - 1).
double percentile(std::vector<double> values, double q);

/// Great-circle errors between matched coordinates (degrees). MAE, MSE and
/// R^2 use `to_unit` to map coordinates first (identity when empty).
/// Throws std::invalid_argument on empty or mismatched input.
ErrorReport haversine_error_report(std::span<const Coord> truth, std::span<const Coord> pred,
                                   const std::function<Coord(const Coord&)>& to_unit = {});

nlohmann::json to_json(const ErrorReport& r, bool with_errors = false);

/// Rows of (label, report) as a markdown table with the column order
/// R^2, MAE, MSE, mean, 25th, 50th, 75th percentile, std.
std::string markdown_table(const std::vector<std::pair<std::string, ErrorReport>>& rows);

}  // namespace voyagecast::eval
