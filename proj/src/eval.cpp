#include "voyagecast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "voyagecast/geo.hpp"

namespace voyagecast::eval {

namespace {

double r2_of(double ss_res, double ss_tot) {
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

PRF1 weighted_prf1(std::span<const int> truth, std::span<const int> pred, std::span<const int> classes) {
  if (truth.empty()) throw std::invalid_argument("no labels to score");
  if (truth.size() != pred.size()) throw std::invalid_argument("truth and prediction lengths differ");
  std::set<int> labels(classes.begin(), classes.end());
  if (labels.empty()) labels.insert(truth.begin(), truth.end());

  std::map<int, std::size_t> tp, fp, fn, support;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++support[truth[i]];
    if (truth[i] == pred[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  std::size_t total = 0;
  for (int c : labels) total += support[c];
  PRF1 out;
  if (total == 0) return out;
  for (int c : labels) {
    const double t = static_cast<double>(tp[c]);
    const double p = tp[c] + fp[c] == 0 ? 0.0 : t / static_cast<double>(tp[c] + fp[c]);
    const double r = tp[c] + fn[c] == 0 ? 0.0 : t / static_cast<double>(tp[c] + fn[c]);
    const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    const double w = static_cast<double>(support[c]);
    out.precision += w * p;
    out.recall += w * r;
    out.f1 += w * f;
  }
  const double n = static_cast<double>(total);
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

Regression regression_metrics(std::span<const double> truth, std::span<const double> pred) {
  if (truth.empty()) throw std::invalid_argument("no values to score");
  if (truth.size() != pred.size()) throw std::invalid_argument("truth and prediction lengths differ");
  const double n = static_cast<double>(truth.size());
  double mean = 0.0;
  for (double y : truth) mean += y;
  mean /= n;
  Regression r;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - pred[i];
    r.mae += std::abs(e);
    r.mse += e * e;
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  r.r2 = r2_of(r.mse, ss_tot);
  r.mae /= n;
  r.mse /= n;
  return r;
}

Regression regression_metrics(std::span<const Coord> truth, std::span<const Coord> pred) {
  if (truth.empty()) throw std::invalid_argument("no values to score");
  if (truth.size() != pred.size()) throw std::invalid_argument("truth and prediction lengths differ");
  Regression out;
  for (std::size_t k = 0; k < 2; ++k) {
    std::vector<double> t, p;
    t.reserve(truth.size());
    p.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      t.push_back(truth[i][k]);
      p.push_back(pred[i][k]);
    }
    const auto r = regression_metrics(t, p);
    out.mae += r.mae / 2.0;
    out.mse += r.mse / 2.0;
    out.r2 += r.r2 / 2.0;
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (rank - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

ErrorReport haversine_error_report(std::span<const Coord> truth, std::span<const Coord> pred,
                                   const std::function<Coord(const Coord&)>& to_unit) {
  if (truth.empty()) throw std::invalid_argument("no coordinates to score");
  if (truth.size() != pred.size()) throw std::invalid_argument("truth and prediction counts differ");
  ErrorReport r;
  r.errors_km.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    r.errors_km.push_back(geo::haversine_km({truth[i][0], truth[i][1]}, {pred[i][0], pred[i][1]}));
  }
  const double n = static_cast<double>(r.errors_km.size());
  for (double e : r.errors_km) r.mean_km += e;
  r.mean_km /= n;
  double var = 0.0;
  for (double e : r.errors_km) var += (e - r.mean_km) * (e - r.mean_km);
  r.std_km = std::sqrt(var / n);
  r.p25_km = percentile(r.errors_km, 0.25);
  r.p50_km = percentile(r.errors_km, 0.50);
  r.p75_km = percentile(r.errors_km, 0.75);
  r.max_km = *std::max_element(r.errors_km.begin(), r.errors_km.end());

  Regression reg;
  if (to_unit) {
    std::vector<Coord> t, p;
    for (const auto& c : truth) t.push_back(to_unit(c));
    for (const auto& c : pred) p.push_back(to_unit(c));
    reg = regression_metrics(t, p);
  } else {
    reg = regression_metrics(truth, pred);
  }
  r.mae = reg.mae;
  r.mse = reg.mse;
  r.r2 = reg.r2;
  return r;
}

nlohmann::json to_json(const ErrorReport& r, bool with_errors) {
  nlohmann::json j{{"r2", r.r2},         {"mae", r.mae},       {"mse", r.mse},       {"mean_km", r.mean_km},
                   {"p25_km", r.p25_km}, {"p50_km", r.p50_km}, {"p75_km", r.p75_km}, {"max_km", r.max_km},
                   {"std_km", r.std_km}, {"count", r.errors_km.size()}};
  if (with_errors) j["errors_km"] = r.errors_km;
  return j;
}

std::string markdown_table(const std::vector<std::pair<std::string, ErrorReport>>& rows) {
  std::string out =
      "| Model | R2 | MAE | MSE | Mean Err. (km) | 25th Pct. | 50th Pct. | 75th Pct. | Std. Dev. |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& [label, r] : rows) {
    out += "| " + label + " | " + fixed(100.0 * r.r2, 2) + "% | " + fixed(r.mae, 4) + " | " + fixed(r.mse, 4) +
           " | " + fixed(r.mean_km, 4) + " | " + fixed(r.p25_km, 4) + " | " + fixed(r.p50_km, 4) + " | " +
           fixed(r.p75_km, 4) + " | " + fixed(r.std_km, 4) + " |\n";
  }
  return out;
}

}  // namespace voyagecast::eval
