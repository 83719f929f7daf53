#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "flamesentinel/core/tensor.hpp"
#include "flamesentinel/dataio/frames.hpp"

namespace flamesentinel::detection {

struct MetricSpec {
  double epsilon = 1e-6;        // reference intensity floor
  std::size_t filter_size = 6;  // mean filter width; 1 disables filtering

  void validate() const;
};

/// D(I) = sum_i I(i) ln(I(i)/eps), pixels at or below eps contributing 0.
double kl_metric(std::span<const float> frame, double epsilon);

/// Upper bound of kl_metric over [0,1]^pixels (every pixel 1).
double max_metric(std::size_t pixels, double epsilon);

/// size x size box mean; the output pixel sits at offset ceil(size/2)-1 in its
/// window along each axis. Out-of-frame taps replicate the nearest edge pixel.
std::vector<float> mean_filter(std::span<const float> frame, std::size_t height, std::size_t width,
                               std::size_t size);

/// Mean over frames of kl_metric(mean_filter(frame)). `frames` holds N
/// frames of height x width.
double sample_metric(std::span<const float> frames, std::size_t height, std::size_t width, const MetricSpec& spec);

struct EventSpec {
  double lambda = 4.0;
  double stable_fraction = 0.1;             // baseline = leading fraction of the trace
  std::optional<std::size_t> stable_window;  // overrides stable_fraction
  double abs_floor_fraction = 0.01;         // of max_metric for the frame size
  std::size_t min_run = 10;                 // samples above threshold that make a transition

  void validate() const;
  std::size_t window_for(std::size_t trace_length) const;
};

struct Events {
  double baseline_mean = 0.0;
  double baseline_std = 0.0;
  double threshold = 0.0;
  std::vector<std::size_t> peaks;
  std::optional<std::size_t> transition;
};

/// Threshold = mean + max(lambda * std, abs_floor) over the baseline window
/// (population std). The transition is the first sample opening a run of at
/// least min_run samples above threshold. Every shorter run before it
/// contributes one peak at its maximum (first index on ties).
Events find_events(std::span<const double> trace, const EventSpec& spec, double abs_floor);

/// Maps a batch [B, N, H, W, 1] to a reconstruction of the same shape.
using Reconstructor = std::function<Tensor<float>(const Tensor<float>&)>;

struct InstabilityTrace {
  std::vector<double> time_s;  // centre frame / fps
  std::vector<double> raw;     // metric of the unreconstructed samples
  std::vector<double> output;  // metric of the reconstructions
  Events events;               // found on `output`
};

InstabilityTrace trace(const Reconstructor& model, const dataio::FrameSequence& seq,
                       const dataio::SamplingSpec& sampling, const MetricSpec& metric, const EventSpec& events,
                       std::size_t batch_size = 8);

/// Columns: sample_index, time_s, metric_raw_input, metric_csae_output, is_peak, is_transition.
void write_trace_csv(const InstabilityTrace& t, const std::filesystem::path& path);
InstabilityTrace read_trace_csv(const std::filesystem::path& path);

nlohmann::json events_json(const InstabilityTrace& t);

}  // namespace flamesentinel::detection
