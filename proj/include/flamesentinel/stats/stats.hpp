#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace flamesentinel::stats {

/// Gaussian kernel density estimate tabulated on an even grid spanning
/// [min - 3h, max + 3h]. Zero outside the grid.
struct Density {
  std::vector<double> grid;
  std::vector<double> values;
  double bandwidth = 0.0;
  std::vector<double> samples;

  double lower() const { return grid.front(); }
  double upper() const { return grid.back(); }
  /// Exact estimate inside [lower, upper], 0 outside.
  double at(double x) const;
};

/// 0.9 * min(std, IQR / 1.34) * n^(-1/5); falls back to max(1e-6, 0.01 |mean|)
/// when that is zero.
double silverman_bandwidth(std::span<const double> values);

/// InputDomainError for fewer than two values, a non-positive bandwidth or
/// fewer than two grid points.
Density kde(std::span<const double> values, std::optional<double> bandwidth = std::nullopt,
            std::size_t grid_points = 512);

/// Trapezoidal integral of a tabulated density.
double integral(const Density& d);

/// Integral of min(p, q) on a fine grid covering both supports.
double overlap(const Density& p, const Density& q, std::size_t grid_points = 4096);

/// P(positive > negative) + 0.5 P(tie), by ranks.
double auc(std::span<const double> negatives, std::span<const double> positives);

struct Separation {
  Density stable;
  Density unstable;
  double overlap = 0.0;
  double auc = 0.0;
  double stable_mean = 0.0;
  double unstable_mean = 0.0;
};

struct SeparationReport {
  std::size_t split_index = 0;  // first unstable sample
  std::size_t stable_count = 0;
  std::size_t unstable_count = 0;
  Separation raw;
  Separation output;
  /// raw.overlap / max(output.overlap, 1e-3)
  double reduction_factor() const;
};

struct SeparationSpec {
  std::optional<double> bandwidth;  // Silverman per class when empty
  std::size_t kde_grid_points = 512;
  std::size_t overlap_grid_points = 4096;

  void validate() const;
};

Separation separate(std::span<const double> stable, std::span<const double> unstable,
                    const SeparationSpec& spec = {});

/// Samples before split_index are stable, the rest unstable. InputDomainError
/// if either side is empty or the traces differ in length.
SeparationReport separation_report(std::span<const double> raw, std::span<const double> output,
                                   std::size_t split_index, const SeparationSpec& spec = {});

nlohmann::json to_json(const SeparationReport& r);

/// Columns x, p_stable, p_unstable on a shared grid covering both densities.
void write_density_csv(const Separation& s, const std::filesystem::path& path, std::size_t grid_points = 512);

}  // namespace flamesentinel::stats
