#include "flamesentinel/detection/detection.hpp"

#include <cmath>
#include <numeric>

#include "flamesentinel/core/csv.hpp"
#include "flamesentinel/core/parallel.hpp"

namespace flamesentinel::detection {

void MetricSpec::validate() const {
  if (!(epsilon > 0.0) || epsilon >= 1.0) throw ConfigError("metric epsilon must lie in (0,1)");
  if (filter_size == 0) throw ConfigError("mean filter size must be at least 1");
}

double kl_metric(std::span<const float> frame, double epsilon) {
  const double log_eps = std::log(epsilon);
  double d = 0.0;
  for (float v : frame) {
    const double x = v;
    if (x > epsilon) d += x * (std::log(x) - log_eps);
  }
  return d;
}

double max_metric(std::size_t pixels, double epsilon) { return static_cast<double>(pixels) * -std::log(epsilon); }

std::vector<float> mean_filter(std::span<const float> frame, std::size_t height, std::size_t width,
                               std::size_t size) {
  if (size == 0) throw ConfigError("mean filter size must be at least 1");
  if (frame.size() != height * width) throw ShapeError("mean_filter: frame size does not match extents");
  if (size == 1) return {frame.begin(), frame.end()};
  const auto anchor = static_cast<std::ptrdiff_t>((size + 1) / 2 - 1);
  const auto n = static_cast<std::ptrdiff_t>(size);
  auto clampi = [](std::ptrdiff_t v, std::size_t extent) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(extent) - 1));
  };
  std::vector<double> rows(height * width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t i = 0; i < n; ++i) s += frame[y * width + clampi(static_cast<std::ptrdiff_t>(x) - anchor + i, width)];
      rows[y * width + x] = s / static_cast<double>(size);
    }
  std::vector<float> out(height * width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t i = 0; i < n; ++i) s += rows[clampi(static_cast<std::ptrdiff_t>(y) - anchor + i, height) * width + x];
      out[y * width + x] = static_cast<float>(s / static_cast<double>(size));
    }
  return out;
}

double sample_metric(std::span<const float> frames, std::size_t height, std::size_t width, const MetricSpec& spec) {
  const std::size_t px = height * width;
  if (px == 0 || frames.empty() || frames.size() % px != 0) throw ShapeError("sample_metric: bad extents");
  const std::size_t n = frames.size() / px;
  double sum = 0.0;
  for (std::size_t f = 0; f < n; ++f) {
    const auto frame = frames.subspan(f * px, px);
    sum += spec.filter_size == 1 ? kl_metric(frame, spec.epsilon)
                                 : kl_metric(mean_filter(frame, height, width, spec.filter_size), spec.epsilon);
  }
  return sum / static_cast<double>(n);
}

void EventSpec::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("events lambda must be positive");
  if (!(stable_fraction > 0.0 && stable_fraction <= 1.0)) throw ConfigError("stable_fraction must lie in (0,1]");
  if (abs_floor_fraction < 0.0) throw ConfigError("abs_floor_fraction must be non-negative");
  if (min_run == 0) throw ConfigError("min_run must be at least 1");
  if (stable_window && *stable_window == 0) throw ConfigError("stable_window must be at least 1");
}

std::size_t EventSpec::window_for(std::size_t trace_length) const {
  if (stable_window) return *stable_window;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(stable_fraction * static_cast<double>(trace_length))));
}

Events find_events(std::span<const double> trace, const EventSpec& spec, double abs_floor) {
  spec.validate();
  Events ev;
  if (trace.empty()) return ev;
  const std::size_t window = spec.window_for(trace.size());
  if (window > trace.size()) {
    throw InputDomainError("stable window of " + std::to_string(window) + " exceeds trace length " +
                           std::to_string(trace.size()));
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < window; ++i) mean += trace[i];
  mean /= static_cast<double>(window);
  double var = 0.0;
  for (std::size_t i = 0; i < window; ++i) var += (trace[i] - mean) * (trace[i] - mean);
  ev.baseline_mean = mean;
  ev.baseline_std = std::sqrt(var / static_cast<double>(window));
  ev.threshold = mean + std::max(spec.lambda * ev.baseline_std, abs_floor);

  std::size_t i = 0;
  while (i < trace.size()) {
    if (!(trace[i] > ev.threshold)) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < trace.size() && trace[end] > ev.threshold) ++end;
    if (end - i >= spec.min_run) {
      ev.transition = i;
      break;
    }
    std::size_t best = i;
    for (std::size_t k = i + 1; k < end; ++k) {
      if (trace[k] > trace[best]) best = k;
    }
    ev.peaks.push_back(best);
    i = end;
  }
  return ev;
}

InstabilityTrace trace(const Reconstructor& model, const dataio::FrameSequence& seq,
                       const dataio::SamplingSpec& sampling, const MetricSpec& metric, const EventSpec& events,
                       std::size_t batch_size) {
  metric.validate();
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  const auto samples = dataio::make_volumes(seq, sampling);
  const std::size_t n = samples.size();
  InstabilityTrace out;
  out.time_s.resize(n);
  out.raw.resize(n);
  out.output.resize(n);
  const std::size_t h = seq.height, w = seq.width;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), start);
    const Tensor<float> batch = dataio::stack_batch(samples, order);
    const Tensor<float> recon = model(batch);
    if (recon.shape() != batch.shape()) {
      throw ShapeError("reconstruction shape " + to_string(recon.shape()) + " does not match input " +
                       to_string(batch.shape()));
    }
    const std::size_t per = batch.size() / count;
    parallel_for(count, [&](std::size_t b) {
      const std::size_t j = start + b;
      out.raw[j] = sample_metric(batch.values().subspan(b * per, per), h, w, metric);
      out.output[j] = sample_metric(recon.values().subspan(b * per, per), h, w, metric);
    });
  }
  for (std::size_t j = 0; j < n; ++j) out.time_s[j] = dataio::sample_center_frame(j, sampling) / seq.fps;
  out.events = find_events(out.output, events, events.abs_floor_fraction * max_metric(h * w, metric.epsilon));
  return out;
}

void write_trace_csv(const InstabilityTrace& t, const std::filesystem::path& path) {
  csv::Writer w(path, {"sample_index", "time_s", "metric_raw_input", "metric_csae_output", "is_peak", "is_transition"});
  for (std::size_t j = 0; j < t.output.size(); ++j) {
    const bool peak = std::find(t.events.peaks.begin(), t.events.peaks.end(), j) != t.events.peaks.end();
    const bool transition = t.events.transition && *t.events.transition == j;
    w.row({static_cast<double>(j), t.time_s[j], t.raw[j], t.output[j], peak ? 1.0 : 0.0, transition ? 1.0 : 0.0});
  }
  w.close();
}

InstabilityTrace read_trace_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  const std::size_t tc = table.column("time_s"), rc = table.column("metric_raw_input"),
                    oc = table.column("metric_csae_output"), pc = table.column("is_peak"),
                    xc = table.column("is_transition");
  InstabilityTrace t;
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    const auto& r = table.rows[j];
    t.time_s.push_back(r[tc]);
    t.raw.push_back(r[rc]);
    t.output.push_back(r[oc]);
    if (r[pc] != 0.0) t.events.peaks.push_back(j);
    if (r[xc] != 0.0 && !t.events.transition) t.events.transition = j;
  }
  return t;
}

nlohmann::json events_json(const InstabilityTrace& t) {
  nlohmann::json peaks = nlohmann::json::array();
  for (std::size_t p : t.events.peaks) peaks.push_back({{"sample_index", p}, {"time_s", t.time_s[p]}});
  nlohmann::json transition = nullptr;
  if (t.events.transition) {
    transition = {{"sample_index", *t.events.transition}, {"time_s", t.time_s[*t.events.transition]}};
  }
  return {{"baseline_mean", t.events.baseline_mean},
          {"baseline_std", t.events.baseline_std},
          {"threshold", t.events.threshold},
          {"peaks", peaks},
          {"transition", transition}};
}

}  // namespace flamesentinel::detection
