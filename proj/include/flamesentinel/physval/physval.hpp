#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flamesentinel/dataio/frames.hpp"
#include "flamesentinel/dataio/pgm.hpp"

namespace flamesentinel::physval {

struct CannySpec {
  double sigma = 1.4;  // Gaussian pre-blur std, px; 0 disables the blur
  double low = 0.08;   // hysteresis thresholds as fractions of the peak gradient magnitude
  double high = 0.2;

  /// ConfigError unless sigma >= 0 and 0 < low < high <= 1.
  void validate() const;
};

struct EdgeMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> mask;  // 0 or 1, row-major

  std::size_t count() const;
};

/// Gaussian blur, Sobel gradients, non-maximum suppression along the gradient
/// direction quantised to 0/45/90/135 degrees, then hysteresis: pixels at or
/// above high * peak are edges, and pixels at or above low * peak join them
/// when 8-connected to an edge. Borders replicate the nearest pixel.
EdgeMap canny(std::span<const float> frame, std::size_t height, std::size_t width, const CannySpec& spec = {});

/// Largest value of the series (P_max).
double peak_pressure(std::span<const double> p);

/// Indices t with p[t] > fraction * P_max. Empty when P_max <= 0.
std::vector<std::size_t> conditioned_instants(std::span<const double> p, double fraction = 0.7);

/// p[t] / P_max where p[t] > fraction * P_max, else 0. All zeros when P_max <= 0.
std::vector<double> normalized_conditioned_pressure(std::span<const double> p, double fraction = 0.7);

/// Conditioned instants of frames [first, first + count), judged against the
/// peak inside that window; returned as absolute frame indices.
std::vector<std::size_t> window_instants(std::span<const double> p, std::size_t first, std::size_t count,
                                         double fraction = 0.7);

struct EdgeEnsemble {
  std::vector<std::size_t> instants;
  std::vector<EdgeMap> members;
  EdgeMap union_map;

  std::size_t count() const noexcept { return members.size(); }
  bool empty() const noexcept { return members.empty(); }
};

/// Canny map of every listed frame, superposed by elementwise OR. An empty
/// instant list gives an empty ensemble. InputDomainError for an instant
/// outside the sequence.
EdgeEnsemble ensemble_edges(const dataio::FrameSequence& seq, std::span<const std::size_t> instants,
                            const CannySpec& spec = {});

/// Union edge count over mean member edge count; 1 when the members coincide.
/// InputDomainError for an empty ensemble or one without edge pixels.
double thinness(const EdgeEnsemble& ensemble);

/// Maxval-1 graymap of an edge mask.
dataio::Graymap to_graymap(const EdgeMap& edges);

/// Columns time_s, normalized_value.
void write_conditioned_pressure_csv(std::span<const double> normalized, double fps, const std::filesystem::path& path);

}  // namespace flamesentinel::physval
