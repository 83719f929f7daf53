#include <algorithm>
#include <cmath>
#include <numbers>

#include "flamesentinel/core/rng.hpp"
#include "flamesentinel/synth/scenario.hpp"

namespace flamesentinel::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent random streams so each component is unaffected by the others.
enum Stream : std::uint64_t { kField = 1, kFlap = 2, kFlicker = 3, kPhase = 4, kScatter = 5, kPressure = 6 };

/// Raised-cosine bump: intensity * cos^2(pi/2 * rho) inside the ellipse, 0 outside.
double bump(double dy, double dx, double ry, double rx, double intensity) {
  const double rho2 = (dy * dy) / (ry * ry) + (dx * dx) / (rx * rx);
  if (rho2 >= 1.0) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * std::sqrt(rho2));
  return intensity * c * c;
}

/// Stationary unit-variance AR(1) with lag-1 correlation exp(-1/frames).
class Ar1 {
 public:
  Ar1(double frames, std::uint64_t seed) : rho_(frames > 0.0 ? std::exp(-1.0 / frames) : 0.0), rng_(seed) {
    value_ = rng_.normal();
  }
  Ar1(double rho, std::uint64_t seed, bool) : rho_(rho), rng_(seed) { value_ = rng_.normal(); }
  double value() const noexcept { return value_; }
  void advance() { value_ = rho_ * value_ + std::sqrt(1.0 - rho_ * rho_) * rng_.normal(); }

 private:
  double rho_;
  Rng rng_;
  double value_ = 0.0;
};

/// Spatially correlated unit-variance Gaussian field evolving as AR(1) in time.
class NoiseField {
 public:
  NoiseField(std::size_t h, std::size_t w, double length, double frames, std::uint64_t seed)
      : h_(h), w_(w), rho_(frames > 0.0 ? std::exp(-1.0 / frames) : 0.0), rng_(seed), value_(h * w), tmp_(h * w) {
    const int radius = length > 0.0 ? static_cast<int>(std::ceil(3.0 * length)) : 0;
    kernel_.resize(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
      const double v = length > 0.0 ? std::exp(-0.5 * i * i / (length * length)) : 1.0;
      kernel_[static_cast<std::size_t>(i + radius)] = v;
      sum += v;
    }
    double sq = 0.0;
    for (double& k : kernel_) {
      k /= sum;
      sq += k * k;
    }
    gain_ = 1.0 / sq;  // 1 / sqrt((sum k^2)^2): restores unit variance in the interior
    draw(value_);
  }

  const std::vector<double>& value() const noexcept { return value_; }

  void advance() {
    std::vector<double> fresh(h_ * w_);
    draw(fresh);
    const double a = std::sqrt(1.0 - rho_ * rho_);
    for (std::size_t i = 0; i < value_.size(); ++i) value_[i] = rho_ * value_[i] + a * fresh[i];
  }

 private:
  void draw(std::vector<double>& out) {
    std::vector<double> white(h_ * w_);
    for (double& v : white) v = rng_.normal();
    const int r = static_cast<int>(kernel_.size() / 2);
    auto clampi = [](int v, std::size_t n) { return static_cast<std::size_t>(std::clamp(v, 0, static_cast<int>(n) - 1)); };
    for (std::size_t y = 0; y < h_; ++y)
      for (std::size_t x = 0; x < w_; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += kernel_[static_cast<std::size_t>(i + r)] * white[y * w_ + clampi(static_cast<int>(x) + i, w_)];
        tmp_[y * w_ + x] = s;
      }
    for (std::size_t y = 0; y < h_; ++y)
      for (std::size_t x = 0; x < w_; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += kernel_[static_cast<std::size_t>(i + r)] * tmp_[clampi(static_cast<int>(y) + i, h_) * w_ + x];
        out[y * w_ + x] = s * gain_;
      }
  }

  std::size_t h_, w_;
  double rho_;
  Rng rng_;
  std::vector<double> kernel_;
  double gain_ = 1.0;
  std::vector<double> value_, tmp_;
};

double initial_phase(const ScenarioSpec& spec) { return Rng(mix_seed(spec.seed, kPhase)).uniform(0.0, kTwoPi); }

double coherent_phase(const ScenarioSpec& spec, double phase0, std::size_t t) {
  return phase0 + kTwoPi * spec.coherent.frequency * static_cast<double>(t) / spec.fps;
}

double lobe(const ScenarioSpec& spec, std::size_t y, std::size_t x, double phase, double depth) {
  const Coherent& c = spec.coherent;
  const double s = std::sin(phase);
  const double cx = c.center_x + c.displacement * s;
  const double gain = 1.0 - depth * 0.5 * (1.0 - s);
  return bump(static_cast<double>(y) - c.center_y, static_cast<double>(x) - cx, c.radius, c.radius, c.intensity * gain);
}

double base_at(const ScenarioSpec& spec, std::size_t y, std::size_t x, double dy, double dx) {
  const BaseFlame& b = spec.base;
  return bump(static_cast<double>(y) - b.center_y - dy, static_cast<double>(x) - b.center_x - dx, b.radius_y,
              b.radius_x, b.intensity);
}

/// Noise-free unstable mass for a given base scale, averaged over one cycle.
double unstable_mass(const ScenarioSpec& spec, double scale) {
  constexpr int kPhases = 64;
  double mass = 0.0;
  for (int k = 0; k < kPhases; ++k) {
    const double phase = kTwoPi * k / kPhases;
    for (std::size_t y = 0; y < spec.height; ++y)
      for (std::size_t x = 0; x < spec.width; ++x) {
        mass += std::min(1.0, scale * base_at(spec, y, x, 0, 0) + lobe(spec, y, x, phase, spec.coherent.modulation_depth));
      }
  }
  return mass / kPhases;
}

}  // namespace

double unstable_base_scale(const ScenarioSpec& spec) {
  if (spec.temporal_only || !spec.coherent.mass_matched) return 1.0;
  double stable = 0.0;
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x < spec.width; ++x) stable += std::min(1.0, base_at(spec, y, x, 0, 0));
  double lo = 0.0, hi = 1.0;
  if (unstable_mass(spec, lo) >= stable) return 0.0;
  if (unstable_mass(spec, hi) <= stable) return 1.0;
  for (int i = 0; i < 50; ++i) {
    const double mid = 0.5 * (lo + hi);
    (unstable_mass(spec, mid) < stable ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

dataio::FrameSequence generate_video(const ScenarioSpec& spec) {
  spec.validate();
  const GroundTruth truth = ground_truth(spec);
  const std::size_t n = spec.frame_count();
  const Turbulence& tb = spec.turbulence;
  dataio::FrameSequence seq(n, spec.height, spec.width, spec.fps);
  seq.meta = {{"scenario", spec.name}, {"seed", spec.seed}};

  NoiseField field(spec.height, spec.width, tb.correlation_length, tb.correlation_frames, mix_seed(spec.seed, kField));
  Ar1 flap_y(tb.flap_frames, mix_seed(spec.seed, kFlap));
  Ar1 flap_x(tb.flap_frames, mix_seed(spec.seed, kFlap + 100));
  Ar1 flicker(tb.flicker_frames, mix_seed(spec.seed, kFlicker));
  Rng scatter(mix_seed(spec.seed, kScatter));
  const double phase0 = initial_phase(spec);
  const double unstable_base = unstable_base_scale(spec);

  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      field.advance();
      flap_y.advance();
      flap_x.advance();
      flicker.advance();
    }
    const double random_phase = scatter.uniform(0.0, kTwoPi);  // drawn every frame to keep streams aligned
    const bool unstable = truth.regime_per_frame[t] == Regime::unstable;
    const double calm = unstable && !spec.temporal_only ? tb.unstable_scale : 1.0;
    const double amplitude = tb.amplitude * calm;
    const double dy = tb.flap * calm * flap_y.value();
    const double dx = tb.flap * calm * flap_x.value();
    const double gain = std::max(0.0, 1.0 + tb.flicker * flicker.value());
    const double base_scale = unstable ? unstable_base : 1.0;

    const bool has_lobe = unstable || spec.temporal_only;
    const double phase = unstable ? coherent_phase(spec, phase0, t) : random_phase;
    const double depth = spec.temporal_only ? 0.0 : spec.coherent.modulation_depth;

    const auto& z = field.value();
    auto frame = seq.frame(t);
    for (std::size_t y = 0; y < spec.height; ++y)
      for (std::size_t x = 0; x < spec.width; ++x) {
        const std::size_t i = y * spec.width + x;
        double v = base_scale * base_at(spec, y, x, dy, dx) * std::max(0.0, 1.0 + amplitude * z[i]);
        if (has_lobe) v += lobe(spec, y, x, phase, depth);
        frame[i] = static_cast<float>(std::clamp(v * gain, 0.0, 1.0));
      }
  }
  return seq;
}

dataio::PressureSeries generate_pressure(const ScenarioSpec& spec) {
  spec.validate();
  const GroundTruth truth = ground_truth(spec);
  const std::size_t n = spec.frame_count();
  Ar1 noise(spec.pressure.noise_correlation, mix_seed(spec.seed, kPressure), true);
  const double phase0 = initial_phase(spec);
  dataio::PressureSeries p;
  p.fps = spec.fps;
  p.values.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) noise.advance();
    double v = spec.pressure.noise_std * noise.value();
    if (truth.regime_per_frame[t] == Regime::unstable) {
      v += spec.pressure.amplitude * std::sin(coherent_phase(spec, phase0, t));
    }
    p.values[t] = v;
  }
  return p;
}

}  // namespace flamesentinel::synth
