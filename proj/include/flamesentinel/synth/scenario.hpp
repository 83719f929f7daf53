#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flamesentinel/dataio/frames.hpp"

namespace flamesentinel::synth {

enum class Regime { stable, unstable };

std::string to_string(Regime r);

struct Segment {
  double start = 0.0;  // s
  double end = 0.0;    // s, exclusive
  Regime regime = Regime::stable;
};

/// Static intensity bump; lengths in pixels, centre in pixel coordinates.
struct BaseFlame {
  double center_y = 15.5;
  double center_x = 11.5;
  double radius_y = 11.0;
  double radius_x = 7.0;
  double intensity = 0.55;
};

/// Multiplicative, spatially correlated AR(1) noise on the base flame, plus
/// an AR(1) displacement of the whole flame (flapping) and a global AR(1)
/// brightness flicker. The unstable regime scales amplitude and flapping by
/// unstable_scale.
struct Turbulence {
  double amplitude = 0.45;
  double correlation_length = 1.5;  // px, Gaussian std of the spatial filter
  double correlation_frames = 3.0;
  double flap = 1.2;                // px, std
  double flap_frames = 8.0;
  double flicker = 0.08;            // relative std
  double flicker_frames = 40.0;
  double unstable_scale = 0.05;
};

/// High-intensity lobe whose centre moves horizontally as displacement·sin(phase)
/// with phase advancing at frequency; brightness follows 1 - depth·(1 - sin)/2.
struct Coherent {
  double frequency = 62.5;  // Hz
  double displacement = 3.0;  // px
  double modulation_depth = 0.5;
  double intensity = 0.95;
  double radius = 4.5;  // px
  double center_y = 15.5;
  double center_x = 19.0;
  /// Scale the base flame in unstable frames so their mean intensity mass
  /// matches stable frames.
  bool mass_matched = true;
};

struct PressureModel {
  double amplitude = 1.0;
  double noise_std = 0.05;
  double noise_correlation = 0.7;  // AR(1) coefficient per frame
};

struct ScenarioSpec {
  std::string name = "custom";
  double duration = 6.0;
  double fps = 500.0;
  std::size_t height = 32;
  std::size_t width = 32;
  BaseFlame base;
  Turbulence turbulence;
  Coherent coherent;
  PressureModel pressure;
  std::vector<Segment> schedule;
  std::uint64_t seed = 0;
  /// Stable frames carry the lobe too, at an independent uniform phase per
  /// frame, with no modulation and identical turbulence, so single frames
  /// of both regimes share one distribution and only temporal order differs.
  bool temporal_only = false;

  std::size_t frame_count() const;
  /// InputDomainError on gaps, overlaps or disorder in the schedule, a
  /// frequency at or above Nyquist, or non-positive extents/rates.
  void validate() const;
  Regime regime_at(double t) const;
};

struct GroundTruth {
  std::optional<double> transition_time;
  std::vector<double> burst_times;  // centres of unstable episodes before the transition
  std::vector<Regime> regime_per_frame;
};

/// Transition = start of the final unstable segment when it runs to the end;
/// every earlier unstable segment is a burst.
GroundTruth ground_truth(const ScenarioSpec& spec);

/// Canned protocols; geometry scales with the frame size (reference 32x32).
///  transition_with_precursors: bursts at D/4 and D/2, transition at 2D/3.
///  sudden_transition: bursts at D/6, 7D/24, 5D/12, 13D/24, transition at 2D/3.
///  no_transition: stable throughout.
/// Bursts last burst_frames frames. ConfigError on an unknown name.
ScenarioSpec make_protocol(std::string_view name, std::uint64_t seed, double fps = 500.0, double duration = 6.0,
                           std::size_t size = 32, std::size_t burst_frames = 24);
const std::vector<std::string>& protocol_names();
/// Nominal stable/unstable split used when reporting on a protocol without a transition.
double nominal_split_time(const ScenarioSpec& spec);

/// A spec whose schedule is a single regime; convenient for training corpora.
ScenarioSpec single_regime(Regime regime, std::uint64_t seed, double fps, double duration, std::size_t size,
                           bool temporal_only = false);

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruth& truth);

dataio::FrameSequence generate_video(const ScenarioSpec& spec);
dataio::PressureSeries generate_pressure(const ScenarioSpec& spec);

/// Unstable-frame base scale used by generate_video.
double unstable_base_scale(const ScenarioSpec& spec);

}  // namespace flamesentinel::synth
