#include "flamesentinel/synth/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flamesentinel/core/error.hpp"

namespace flamesentinel::synth {

NLOHMANN_JSON_SERIALIZE_ENUM(Regime, {{Regime::stable, "stable"}, {Regime::unstable, "unstable"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Segment, start, end, regime)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaseFlame, center_y, center_x, radius_y, radius_x, intensity)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Turbulence, amplitude, correlation_length, correlation_frames, flap,
                                                flap_frames, flicker, flicker_frames, unstable_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Coherent, frequency, displacement, modulation_depth, intensity, radius,
                                                center_y, center_x, mass_matched)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PressureModel, amplitude, noise_std, noise_correlation)

std::string to_string(Regime r) { return r == Regime::stable ? "stable" : "unstable"; }

namespace {

std::size_t to_frame(double t, double fps) { return static_cast<std::size_t>(std::lround(t * fps)); }

}  // namespace

std::size_t ScenarioSpec::frame_count() const { return to_frame(duration, fps); }

void ScenarioSpec::validate() const {
  if (!(fps > 0.0) || !(duration > 0.0) || height == 0 || width == 0) {
    throw InputDomainError("scenario needs positive fps, duration and frame size");
  }
  if (frame_count() == 0) throw InputDomainError("scenario is shorter than one frame");
  if (!(coherent.frequency > 0.0) || !(coherent.frequency < fps / 2.0)) {
    throw InputDomainError("coherent frequency " + std::to_string(coherent.frequency) +
                           " Hz must lie in (0, fps/2)");
  }
  if (coherent.modulation_depth < 0.0 || coherent.modulation_depth > 1.0) {
    throw InputDomainError("modulation depth must lie in [0,1]");
  }
  if (pressure.noise_correlation < 0.0 || pressure.noise_correlation >= 1.0) {
    throw InputDomainError("pressure noise correlation must lie in [0,1)");
  }
  if (schedule.empty()) throw InputDomainError("schedule is empty");
  double cursor = 0.0;
  for (const auto& s : schedule) {
    if (std::abs(s.start - cursor) > 1e-9) {
      throw InputDomainError("schedule segments must be ordered and contiguous from 0; segment starts at " +
                             std::to_string(s.start) + ", expected " + std::to_string(cursor));
    }
    if (!(s.end > s.start)) throw InputDomainError("schedule segment has non-positive length");
    cursor = s.end;
  }
  if (std::abs(cursor - duration) > 1e-9) {
    throw InputDomainError("schedule ends at " + std::to_string(cursor) + " s but duration is " +
                           std::to_string(duration) + " s");
  }
}

Regime ScenarioSpec::regime_at(double t) const {
  const std::size_t f = to_frame(t, fps);
  for (const auto& s : schedule) {
    if (f >= to_frame(s.start, fps) && f < to_frame(s.end, fps)) return s.regime;
  }
  return schedule.empty() ? Regime::stable : schedule.back().regime;
}

GroundTruth ground_truth(const ScenarioSpec& spec) {
  spec.validate();
  GroundTruth g;
  const std::size_t n = spec.frame_count();
  g.regime_per_frame.assign(n, Regime::stable);
  for (const auto& s : spec.schedule) {
    const std::size_t a = std::min(n, to_frame(s.start, spec.fps));
    const std::size_t b = std::min(n, to_frame(s.end, spec.fps));
    std::fill(g.regime_per_frame.begin() + static_cast<std::ptrdiff_t>(a),
              g.regime_per_frame.begin() + static_cast<std::ptrdiff_t>(b), s.regime);
  }
  const Segment& last = spec.schedule.back();
  const bool ends_unstable = last.regime == Regime::unstable;
  if (ends_unstable) g.transition_time = last.start;
  const std::size_t bursts = spec.schedule.size() - (ends_unstable ? 1 : 0);
  for (std::size_t i = 0; i < bursts; ++i) {
    const auto& s = spec.schedule[i];
    if (s.regime == Regime::unstable) g.burst_times.push_back(0.5 * (s.start + s.end));
  }
  return g;
}

namespace {

ScenarioSpec scaled_defaults(std::uint64_t seed, double fps, double duration, std::size_t size) {
  ScenarioSpec s;
  s.seed = seed;
  s.fps = fps;
  s.duration = duration;
  s.height = s.width = size;
  const double k = static_cast<double>(size) / 32.0;
  auto at = [k](double ref) { return (ref + 0.5) * k - 0.5; };  // pixel-centre coordinate rescale
  s.base.center_y = at(s.base.center_y);
  s.base.center_x = at(s.base.center_x);
  s.base.radius_y *= k;
  s.base.radius_x *= k;
  s.coherent.center_y = at(s.coherent.center_y);
  s.coherent.center_x = at(s.coherent.center_x);
  s.coherent.radius *= k;
  s.coherent.displacement *= k;
  s.turbulence.correlation_length *= k;
  s.turbulence.flap *= k;
  return s;
}

std::vector<Segment> schedule_with(double duration, std::vector<std::pair<double, double>> unstable) {
  std::sort(unstable.begin(), unstable.end());
  std::vector<Segment> out;
  double cursor = 0.0;
  for (auto [a, b] : unstable) {
    if (a > cursor) out.push_back({cursor, a, Regime::stable});
    out.push_back({a, b, Regime::unstable});
    cursor = b;
  }
  if (cursor < duration) out.push_back({cursor, duration, Regime::stable});
  return out;
}

}  // namespace

const std::vector<std::string>& protocol_names() {
  static const std::vector<std::string> names{"transition_with_precursors", "sudden_transition", "no_transition"};
  return names;
}

ScenarioSpec make_protocol(std::string_view name, std::uint64_t seed, double fps, double duration, std::size_t size,
                           std::size_t burst_frames) {
  ScenarioSpec s = scaled_defaults(seed, fps, duration, size);
  s.name = std::string(name);
  const double half = 0.5 * static_cast<double>(burst_frames) / fps;
  const double transition = 2.0 * duration / 3.0;
  auto burst = [half](double c) { return std::pair{c - half, c + half}; };
  if (name == "transition_with_precursors") {
    s.schedule = schedule_with(duration, {burst(duration / 4), burst(duration / 2), {transition, duration}});
  } else if (name == "sudden_transition") {
    s.schedule = schedule_with(duration, {burst(duration * 4 / 24), burst(duration * 7 / 24),
                                          burst(duration * 10 / 24), burst(duration * 13 / 24),
                                          {transition, duration}});
  } else if (name == "no_transition") {
    s.schedule = {{0.0, duration, Regime::stable}};
  } else {
    throw ConfigError("unknown protocol '" + std::string(name) +
                      "' (expected transition_with_precursors, sudden_transition or no_transition)");
  }
  s.validate();
  return s;
}

double nominal_split_time(const ScenarioSpec& spec) {
  const GroundTruth g = ground_truth(spec);
  return g.transition_time.value_or(2.0 * spec.duration / 3.0);
}

ScenarioSpec single_regime(Regime regime, std::uint64_t seed, double fps, double duration, std::size_t size,
                           bool temporal_only) {
  ScenarioSpec s = scaled_defaults(seed, fps, duration, size);
  s.name = to_string(regime) + (temporal_only ? "_temporal_only" : "");
  s.temporal_only = temporal_only;
  s.schedule = {{0.0, duration, regime}};
  s.validate();
  return s;
}

nlohmann::json to_json(const ScenarioSpec& s) {
  return {{"name", s.name},         {"duration", s.duration},     {"fps", s.fps},
          {"height", s.height},     {"width", s.width},           {"base", s.base},
          {"turbulence", s.turbulence}, {"coherent", s.coherent}, {"pressure", s.pressure},
          {"schedule", s.schedule}, {"seed", s.seed},             {"temporal_only", s.temporal_only}};
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    s.name = j.at("name").get<std::string>();
    s.duration = j.at("duration").get<double>();
    s.fps = j.at("fps").get<double>();
    s.height = j.at("height").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.base = j.at("base").get<BaseFlame>();
    s.turbulence = j.at("turbulence").get<Turbulence>();
    s.coherent = j.at("coherent").get<Coherent>();
    s.pressure = j.at("pressure").get<PressureModel>();
    s.schedule = j.at("schedule").get<std::vector<Segment>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.temporal_only = j.at("temporal_only").get<bool>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid scenario description: ") + e.what());
  }
}

nlohmann::json to_json(const GroundTruth& g) {
  nlohmann::json regimes = nlohmann::json::array();
  for (Regime r : g.regime_per_frame) regimes.push_back(r == Regime::stable ? 0 : 1);
  return {{"transition_time", g.transition_time ? nlohmann::json(*g.transition_time) : nlohmann::json(nullptr)},
          {"burst_times", g.burst_times},
          {"regime_per_frame", regimes}};
}

}  // namespace flamesentinel::synth
