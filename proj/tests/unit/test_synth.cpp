#include <doctest.h>

#include <cmath>
#include <numeric>

#include "flamesentinel/core/error.hpp"
#include "flamesentinel/synth/scenario.hpp"

using namespace flamesentinel;
using namespace flamesentinel::synth;

namespace {

void quiet(ScenarioSpec& s) {
  s.turbulence.amplitude = 0.0;
  s.turbulence.flap = 0.0;
  s.turbulence.flicker = 0.0;
}

double frame_mass(const dataio::FrameSequence& seq, std::size_t t) {
  double m = 0.0;
  for (float v : seq.frame(t)) m += v;
  return m;
}

double centroid_x(const dataio::FrameSequence& seq, std::size_t t) {
  double m = 0.0, mx = 0.0;
  const auto f = seq.frame(t);
  for (std::size_t y = 0; y < seq.height; ++y) {
    for (std::size_t x = 0; x < seq.width; ++x) {
      m += f[y * seq.width + x];
      mx += f[y * seq.width + x] * static_cast<double>(x);
    }
  }
  return mx / m;
}

double mean_mass(const dataio::FrameSequence& seq, Regime r, const GroundTruth& truth) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < seq.count; ++t) {
    if (truth.regime_per_frame[t] != r) continue;
    sum += frame_mass(seq, t);
    ++n;
  }
  return sum / static_cast<double>(n);
}

ScenarioSpec split_schedule(std::uint64_t seed) {
  ScenarioSpec s = single_regime(Regime::stable, seed, 500.0, 2.0, 32);
  s.schedule = {{0.0, 1.0, Regime::stable}, {1.0, 2.0, Regime::unstable}};
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const auto spec = make_protocol("transition_with_precursors", 7, 500.0, 0.5);
  const auto a = generate_video(spec);
  const auto b = generate_video(spec);
  CHECK(a.values == b.values);
  CHECK(generate_pressure(spec).values == generate_pressure(spec).values);

  const auto c = generate_video(make_protocol("transition_with_precursors", 8, 500.0, 0.5));
  CHECK(a.values != c.values);
}

TEST_CASE("frames are valid intensities") {
  const auto seq = generate_video(make_protocol("sudden_transition", 3, 500.0, 1.0));
  CHECK_NOTHROW(seq.validate());
  CHECK(seq.count == 500);
  CHECK(seq.height == 32);
  CHECK(seq.width == 32);
  const auto [lo, hi] = std::minmax_element(seq.values.begin(), seq.values.end());
  CHECK(*lo >= 0.0f);
  CHECK(*hi <= 1.0f);
  CHECK(*hi > 0.5f);
}

TEST_CASE("without turbulence a stable video is the static base flame") {
  ScenarioSpec s = single_regime(Regime::stable, 1, 500.0, 0.1, 32);
  quiet(s);
  const auto seq = generate_video(s);
  for (std::size_t t = 1; t < seq.count; ++t) {
    CHECK(std::equal(seq.frame(t).begin(), seq.frame(t).end(), seq.frame(0).begin()));
  }
  // Pixel (15, 11) lies 0.5 px from the bump centre (15.5, 11.5):
  // rho^2 = 0.25/121 + 0.25/49.
  const double rho = std::sqrt(0.25 / 121.0 + 0.25 / 49.0);
  const double c = std::cos(0.5 * M_PI * rho);
  CHECK(seq.frame(0)[15 * 32 + 11] == doctest::Approx(0.55 * c * c).epsilon(1e-6));
  CHECK(seq.frame(0)[0] == 0.0f);
}

TEST_CASE("unstable lobe oscillates at the coherent frequency") {
  ScenarioSpec s = single_regime(Regime::unstable, 2, 3000.0, 0.1, 32);
  quiet(s);
  s.coherent.frequency = 120.0;  // 25 frames per cycle at 3000 fps
  const auto seq = generate_video(s);
  std::vector<double> cx(seq.count);
  for (std::size_t t = 0; t < seq.count; ++t) cx[t] = centroid_x(seq, t);
  const double mean = std::accumulate(cx.begin(), cx.end(), 0.0) / static_cast<double>(cx.size());
  std::size_t best_lag = 0;
  double best = -1e300;
  for (std::size_t lag = 5; lag <= 60; ++lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < cx.size(); ++t) acc += (cx[t] - mean) * (cx[t + lag] - mean);
    acc /= static_cast<double>(cx.size() - lag);
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 25);
  const auto [lo, hi] = std::minmax_element(cx.begin(), cx.end());
  CHECK(*hi - *lo > 1.0);
}

TEST_CASE("regime switches on the scheduled frame") {
  ScenarioSpec s = split_schedule(4);
  quiet(s);
  const GroundTruth truth = ground_truth(s);
  REQUIRE(truth.regime_per_frame.size() == 1000);
  CHECK(truth.regime_per_frame[499] == Regime::stable);
  CHECK(truth.regime_per_frame[500] == Regime::unstable);
  CHECK(s.regime_at(0.998) == Regime::stable);
  CHECK(s.regime_at(1.0) == Regime::unstable);

  // The lobe region lights up only in unstable frames.
  const auto seq = generate_video(s);
  const std::size_t lobe_pixel = 15 * 32 + 19;
  double stable_max = 0.0, unstable_max = 0.0;
  for (std::size_t t = 0; t < 500; ++t) stable_max = std::max(stable_max, double(seq.frame(t)[lobe_pixel]));
  for (std::size_t t = 500; t < 1000; ++t) unstable_max = std::max(unstable_max, double(seq.frame(t)[lobe_pixel]));
  CHECK(unstable_max > stable_max + 0.2);
}

TEST_CASE("pressure is weak noise when stable and a unit oscillation when unstable") {
  const ScenarioSpec s = split_schedule(5);
  const auto p = generate_pressure(s);
  REQUIRE(p.values.size() == 1000);
  CHECK(p.fps == 500.0);
  double stable_peak = 0.0, unstable_peak = 0.0;
  for (std::size_t t = 0; t < 500; ++t) stable_peak = std::max(stable_peak, std::abs(p.values[t]));
  for (std::size_t t = 500; t < 1000; ++t) unstable_peak = std::max(unstable_peak, std::abs(p.values[t]));
  CHECK(stable_peak < 6.0 * s.pressure.noise_std);
  CHECK(unstable_peak > 0.9);
  CHECK(unstable_peak < 1.0 + 6.0 * s.pressure.noise_std);
}

TEST_CASE("protocol ground truths") {
  SUBCASE("transition with precursors") {
    const auto truth = ground_truth(make_protocol("transition_with_precursors", 1));
    REQUIRE(truth.transition_time);
    CHECK(*truth.transition_time == doctest::Approx(4.0));
    REQUIRE(truth.burst_times.size() == 2);
    CHECK(truth.burst_times[0] == doctest::Approx(1.5));
    CHECK(truth.burst_times[1] == doctest::Approx(3.0));
    CHECK(std::count(truth.regime_per_frame.begin(), truth.regime_per_frame.end(), Regime::unstable) ==
          2 * 24 + 1000);
  }
  SUBCASE("sudden transition") {
    const auto truth = ground_truth(make_protocol("sudden_transition", 1));
    REQUIRE(truth.transition_time);
    CHECK(*truth.transition_time == doctest::Approx(4.0));
    REQUIRE(truth.burst_times.size() == 4);
    const double expected[] = {1.0, 1.75, 2.5, 3.25};
    for (std::size_t i = 0; i < 4; ++i) CHECK(truth.burst_times[i] == doctest::Approx(expected[i]));
  }
  SUBCASE("no transition") {
    const auto spec = make_protocol("no_transition", 1);
    const auto truth = ground_truth(spec);
    CHECK_FALSE(truth.transition_time);
    CHECK(truth.burst_times.empty());
    CHECK(nominal_split_time(spec) == doctest::Approx(4.0));
  }
  CHECK(protocol_names().size() == 3);
  CHECK_THROWS_AS(make_protocol("bogus", 1), ConfigError);
}

TEST_CASE("geometry scales with the frame size") {
  ScenarioSpec s = single_regime(Regime::stable, 1, 500.0, 0.02, 64);
  quiet(s);
  const auto seq = generate_video(s);
  CHECK(seq.height == 64);
  // Twice the size: the base centre moves to (31.5, 23.5), so the peak sits
  // among the four pixels around it.
  const auto f = seq.frame(0);
  const auto peak = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
  CHECK((peak / 64 == 31 || peak / 64 == 32));
  CHECK((peak % 64 == 23 || peak % 64 == 24));
}

TEST_CASE("mass matching equalises mean frame intensity across regimes") {
  ScenarioSpec s = split_schedule(6);
  SUBCASE("noise free") {
    quiet(s);
    const auto seq = generate_video(s);
    const auto truth = ground_truth(s);
    const double stable = mean_mass(seq, Regime::stable, truth);
    const double unstable = mean_mass(seq, Regime::unstable, truth);
    CHECK(unstable == doctest::Approx(stable).epsilon(0.02));
    CHECK(unstable_base_scale(s) < 1.0);
  }
  SUBCASE("with turbulence") {
    // Matching is exact only noise-free; clipping and the slow flicker leave
    // a residual of a few percent.
    const auto seq = generate_video(s);
    const auto truth = ground_truth(s);
    CHECK(mean_mass(seq, Regime::unstable, truth) ==
          doctest::Approx(mean_mass(seq, Regime::stable, truth)).epsilon(0.15));
  }
}

TEST_CASE("temporal-only variant matches single-frame marginals across regimes") {
  ScenarioSpec s = split_schedule(9);
  s.temporal_only = true;
  s.duration = 4.0;
  s.schedule = {{0.0, 2.0, Regime::stable}, {2.0, 4.0, Regime::unstable}};
  const auto seq = generate_video(s);
  const auto truth = ground_truth(s);
  CHECK(unstable_base_scale(s) == 1.0);
  CHECK(mean_mass(seq, Regime::unstable, truth) ==
        doctest::Approx(mean_mass(seq, Regime::stable, truth)).epsilon(0.05));

  // Mean image over each regime agrees pixel by pixel up to sampling noise.
  const std::size_t px = seq.frame_size();
  std::vector<double> ms(px, 0.0), mu(px, 0.0);
  for (std::size_t t = 0; t < seq.count; ++t) {
    auto& m = truth.regime_per_frame[t] == Regime::stable ? ms : mu;
    for (std::size_t i = 0; i < px; ++i) m[i] += seq.frame(t)[i] / 1000.0;
  }
  double diff = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < px; ++i) {
    diff = std::max(diff, std::abs(ms[i] - mu[i]));
    peak = std::max(peak, ms[i]);
  }
  CHECK(diff < 0.1 * peak);
}

TEST_CASE("scenario JSON round trip") {
  ScenarioSpec s = make_protocol("sudden_transition", 42, 400.0, 1.5, 48, 12);
  s.turbulence.flap = 0.7;
  s.temporal_only = true;
  const auto j = to_json(s);
  const ScenarioSpec back = scenario_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(generate_video(back).values == generate_video(s).values);

  const auto truth = to_json(ground_truth(s));
  CHECK(truth.at("burst_times").size() == 4);
  CHECK(truth.at("transition_time").get<double>() == doctest::Approx(1.0));

  CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"fps", "fast"}}), FormatError);
}

TEST_CASE("invalid scenarios are rejected") {
  ScenarioSpec s = single_regime(Regime::stable, 1, 500.0, 1.0, 32);
  SUBCASE("frequency at Nyquist") {
    s.coherent.frequency = 250.0;
    CHECK_THROWS_AS(s.validate(), InputDomainError);
  }
  SUBCASE("gap in schedule") {
    s.schedule = {{0.0, 0.4, Regime::stable}, {0.5, 1.0, Regime::unstable}};
    CHECK_THROWS_AS(s.validate(), InputDomainError);
  }
  SUBCASE("schedule shorter than duration") {
    s.schedule = {{0.0, 0.5, Regime::stable}};
    CHECK_THROWS_AS(s.validate(), InputDomainError);
  }
  SUBCASE("zero fps") {
    s.fps = 0.0;
    CHECK_THROWS_AS(s.validate(), InputDomainError);
  }
}
