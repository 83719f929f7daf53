#include "flamesentinel/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flamesentinel/core/csv.hpp"
#include "flamesentinel/core/error.hpp"

namespace flamesentinel::stats {
namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Linear-interpolated quantile of sorted data (type 7).
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

std::vector<double> even_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

}  // namespace

double Density::at(double x) const {
  if (grid.empty() || x < lower() || x > upper()) return 0.0;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  double s = 0.0;
  for (double v : samples) {
    const double z = (x - v) / bandwidth;
    s += std::exp(-0.5 * z * z);
  }
  return s * norm;
}

double silverman_bandwidth(std::span<const double> values) {
  if (values.size() < 2) throw InputDomainError("bandwidth needs at least two values");
  const double m = mean_of(values);
  double var = 0.0;
  for (double v : values) var += (v - m) * (v - m);
  const double sd = std::sqrt(var / static_cast<double>(values.size() - 1));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = std::max(sd, iqr / 1.34);  // heavy ties on one side of the IQR
  const double h = 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
  if (h > 0.0 && std::isfinite(h)) return h;
  return std::max(1e-6, 0.01 * std::abs(m));
}

Density kde(std::span<const double> values, std::optional<double> bandwidth, std::size_t grid_points) {
  if (values.size() < 2) throw InputDomainError("kde needs at least two values");
  if (grid_points < 2) throw InputDomainError("kde needs at least two grid points");
  for (double v : values) {
    if (!std::isfinite(v)) throw InputDomainError("kde input contains a non-finite value");
  }
  Density d;
  d.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(values);
  if (!(d.bandwidth > 0.0)) throw InputDomainError("kde bandwidth must be positive");
  d.samples.assign(values.begin(), values.end());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  d.grid = even_grid(*lo - 3.0 * d.bandwidth, *hi + 3.0 * d.bandwidth, grid_points);
  d.values.resize(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) d.values[i] = d.at(d.grid[i]);
  return d;
}

double integral(const Density& d) { return trapezoid(d.grid, d.values); }

double overlap(const Density& p, const Density& q, std::size_t grid_points) {
  const double lo = std::min(p.lower(), q.lower());
  const double hi = std::max(p.upper(), q.upper());
  const auto grid = even_grid(lo, hi, grid_points);
  // Include both supports' end points so the zero extension does not clip mass.
  std::vector<double> x = grid;
  for (double e : {p.lower(), p.upper(), q.lower(), q.upper()}) x.push_back(e);
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  std::vector<double> m(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = std::min(p.at(x[i]), q.at(x[i]));
  return std::clamp(trapezoid(x, m), 0.0, 1.0);
}

double auc(std::span<const double> negatives, std::span<const double> positives) {
  if (negatives.empty() || positives.empty()) throw InputDomainError("auc needs both classes");
  struct Item {
    double v;
    bool positive;
  };
  std::vector<Item> all;
  for (double v : negatives) all.push_back({v, false});
  for (double v : positives) all.push_back({v, true});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].positive) rank_sum += mid_rank;
    }
    i = j;
  }
  const auto np = static_cast<double>(positives.size());
  const auto nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1) / 2.0) / (np * nn);
}

double SeparationReport::reduction_factor() const { return raw.overlap / std::max(output.overlap, 1e-3); }

void SeparationSpec::validate() const {
  if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) throw ConfigError("stats bandwidth must be positive");
  if (kde_grid_points < 2 || overlap_grid_points < 2) throw ConfigError("stats grids need at least two points");
}

Separation separate(std::span<const double> stable, std::span<const double> unstable, const SeparationSpec& spec) {
  spec.validate();
  Separation s;
  s.stable = kde(stable, spec.bandwidth, spec.kde_grid_points);
  s.unstable = kde(unstable, spec.bandwidth, spec.kde_grid_points);
  s.overlap = overlap(s.stable, s.unstable, spec.overlap_grid_points);
  s.auc = auc(stable, unstable);
  s.stable_mean = mean_of(stable);
  s.unstable_mean = mean_of(unstable);
  return s;
}

SeparationReport separation_report(std::span<const double> raw, std::span<const double> output,
                                   std::size_t split_index, const SeparationSpec& spec) {
  if (raw.size() != output.size()) throw InputDomainError("raw and output traces differ in length");
  if (split_index < 2 || split_index + 2 > raw.size()) {
    throw InputDomainError("split at sample " + std::to_string(split_index) + " leaves fewer than two samples on a side of " +
                           std::to_string(raw.size()));
  }
  SeparationReport r;
  r.split_index = split_index;
  r.stable_count = split_index;
  r.unstable_count = raw.size() - split_index;
  r.raw = separate(raw.first(split_index), raw.subspan(split_index), spec);
  r.output = separate(output.first(split_index), output.subspan(split_index), spec);
  return r;
}

nlohmann::json to_json(const SeparationReport& r) {
  auto side = [](const Separation& s) {
    return nlohmann::json{{"overlap", s.overlap},
                          {"auc", s.auc},
                          {"stable_mean", s.stable_mean},
                          {"unstable_mean", s.unstable_mean},
                          {"bandwidth_stable", s.stable.bandwidth},
                          {"bandwidth_unstable", s.unstable.bandwidth}};
  };
  return {{"split_index", r.split_index},
          {"stable_count", r.stable_count},
          {"unstable_count", r.unstable_count},
          {"raw", side(r.raw)},
          {"output", side(r.output)},
          {"overlap_reduction_factor", r.reduction_factor()}};
}

void write_density_csv(const Separation& s, const std::filesystem::path& path, std::size_t grid_points) {
  const double lo = std::min(s.stable.lower(), s.unstable.lower());
  const double hi = std::max(s.stable.upper(), s.unstable.upper());
  csv::Writer w(path, {"x", "p_stable", "p_unstable"});
  for (double x : even_grid(lo, hi, grid_points)) w.row({x, s.stable.at(x), s.unstable.at(x)});
  w.close();
}

}  // namespace flamesentinel::stats
