#include <doctest.h>

#include <cmath>
#include <fstream>

#include "flamesentinel/core/csv.hpp"
#include "flamesentinel/core/error.hpp"
#include "flamesentinel/core/rng.hpp"
#include "flamesentinel/physval/physval.hpp"
#include "flamesentinel/synth/scenario.hpp"
#include "support.hpp"

using namespace flamesentinel;
using namespace flamesentinel::physval;

namespace {

std::vector<float> square_frame(std::size_t n, long top, long left, long side) {
  std::vector<float> f(n * n, 0.0f);
  for (long y = top; y < top + side; ++y)
    for (long x = left; x < left + side; ++x) f[static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x)] = 1.0f;
  return f;
}

// Distance in the max norm from (y, x) to the outline of the square.
long outline_distance(long y, long x, long top, long left, long side) {
  const long bottom = top + side - 1, right = left + side - 1;
  const bool inside = y >= top && y <= bottom && x >= left && x <= right;
  if (inside) return std::min({y - top, bottom - y, x - left, right - x});
  const long dy = y < top ? top - y : (y > bottom ? y - bottom : 0);
  const long dx = x < left ? left - x : (x > right ? x - right : 0);
  return std::max(dy, dx);
}

dataio::FrameSequence sequence_of(const std::vector<std::vector<float>>& frames, std::size_t n) {
  dataio::FrameSequence seq(frames.size(), n, n, 500.0);
  for (std::size_t t = 0; t < frames.size(); ++t) std::copy(frames[t].begin(), frames[t].end(), seq.frame(t).begin());
  return seq;
}

}  // namespace

TEST_CASE("canny finds nothing in a constant frame") {
  const std::vector<float> f(32 * 32, 0.4f);
  CHECK(canny(f, 32, 32).count() == 0);
}

TEST_CASE("canny on a vertical step") {
  std::vector<float> f(32 * 32, 0.0f);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 16; x < 32; ++x) f[y * 32 + x] = 1.0f;
  const EdgeMap e = canny(f, 32, 32, {1.0, 0.08, 0.2});
  for (std::size_t y = 0; y < 32; ++y) {
    std::size_t in_row = 0;
    for (std::size_t x = 0; x < 32; ++x) {
      if (!e.mask[y * 32 + x]) continue;
      ++in_row;
      CHECK((x == 15 || x == 16));
    }
    CHECK(in_row >= 1);
  }
}

TEST_CASE("canny outlines a filled square") {
  const long n = 32, top = 8, side = 16;
  const auto f = square_frame(n, top, top, side);
  const EdgeMap e = canny(f, n, n);
  const double perimeter = 4.0 * static_cast<double>(side);
  CHECK(static_cast<double>(e.count()) >= 0.5 * perimeter);
  CHECK(static_cast<double>(e.count()) <= 2.0 * perimeter);
  for (long y = 0; y < n; ++y)
    for (long x = 0; x < n; ++x) {
      if (e.mask[static_cast<std::size_t>(y * n + x)]) CHECK(outline_distance(y, x, top, top, side) <= 1);
    }
}

TEST_CASE("canny ignores brightness offsets and scale") {
  const auto spec = synth::single_regime(synth::Regime::stable, 3, 500.0, 0.01, 32);
  const auto seq = synth::generate_video(spec);
  const auto frame = seq.frame(2);
  std::vector<float> shifted(frame.begin(), frame.end()), scaled(frame.begin(), frame.end());
  for (float& v : shifted) v += 0.25f;
  for (float& v : scaled) v *= 2.0f;
  const EdgeMap a = canny(frame, 32, 32);
  CHECK(a.count() > 0);
  CHECK(canny(shifted, 32, 32).mask == a.mask);
  CHECK(canny(scaled, 32, 32).mask == a.mask);
}

TEST_CASE("canny parameter validation") {
  const std::vector<float> f(16, 0.0f);
  CHECK_THROWS_AS(canny(f, 4, 4, {1.0, 0.3, 0.2}), ConfigError);
  CHECK_THROWS_AS(canny(f, 4, 4, {-1.0, 0.1, 0.2}), ConfigError);
  CHECK_THROWS_AS(canny(f, 4, 5), ShapeError);
}

TEST_CASE("conditioned pressure on small examples") {
  const std::vector<double> p{0.0, 1.0, 0.8, 0.5};
  CHECK(conditioned_instants(p) == std::vector<std::size_t>{1, 2});
  CHECK(normalized_conditioned_pressure(p) == std::vector<double>{0.0, 1.0, 0.8, 0.0});

  const std::vector<double> flat(5, 2.0);
  CHECK(conditioned_instants(flat).size() == 5);

  const std::vector<double> negative{-1.0, -0.5, -2.0};
  CHECK(conditioned_instants(negative).empty());
  for (double v : normalized_conditioned_pressure(negative)) CHECK(v == 0.0);

  CHECK_THROWS_AS(conditioned_instants(std::vector<double>{}), InputDomainError);
  CHECK_THROWS_AS(conditioned_instants(p, 1.0), ConfigError);
}

TEST_CASE("conditioned pressure properties on a noisy sinusoid") {
  Rng rng(11);
  std::vector<double> p(5000);
  for (std::size_t t = 0; t < p.size(); ++t) p[t] = std::sin(0.0123 * static_cast<double>(t) * 2.0 * M_PI) + 0.01 * rng.normal();
  const auto norm = normalized_conditioned_pressure(p);
  double peak = 0.0;
  for (double v : norm) {
    CHECK((v == 0.0 || (v > 0.7 && v <= 1.0)));
    peak = std::max(peak, v);
  }
  CHECK(peak == 1.0);

  std::vector<double> scaled(p);
  for (double& v : scaled) v *= 37.5;
  CHECK(conditioned_instants(scaled) == conditioned_instants(p));
}

TEST_CASE("a pure sinusoid selects about a quarter of its samples") {
  std::vector<double> p(100000);
  for (std::size_t t = 0; t < p.size(); ++t) p[t] = std::sin(2.0 * M_PI * static_cast<double>(t) / 97.3);
  const double fraction = static_cast<double>(conditioned_instants(p).size()) / static_cast<double>(p.size());
  const double expected = std::acos(0.7) / M_PI;  // share of a cycle with sin > 0.7
  CHECK(expected == doctest::Approx(0.2532).epsilon(1e-3));
  CHECK(std::abs(fraction - expected) < 0.02);
}

TEST_CASE("conditioned clusters recur once per coherent cycle") {
  const auto spec = synth::single_regime(synth::Regime::unstable, 4, 500.0, 1.0, 32);
  const auto p = synth::generate_pressure(spec);
  const auto idx = conditioned_instants(p.values);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i == 0 || idx[i] != idx[i - 1] + 1) starts.push_back(idx[i]);
  }
  REQUIRE(starts.size() > 10);
  const double period = spec.fps / spec.coherent.frequency;  // 8 frames
  for (std::size_t i = 1; i < starts.size(); ++i) {
    const double gap = static_cast<double>(starts[i] - starts[i - 1]);
    const double cycles = std::round(gap / period);
    CHECK(cycles >= 1.0);
    CHECK(std::abs(gap - cycles * period) <= 1.0);
  }
}

TEST_CASE("window instants use the peak inside the window") {
  std::vector<double> p(40, 0.0);
  p[5] = 10.0;
  p[25] = 1.0;
  p[26] = 0.8;
  p[27] = 0.6;
  CHECK(conditioned_instants(p) == std::vector<std::size_t>{5});
  CHECK(window_instants(p, 20, 10) == std::vector<std::size_t>{25, 26});
  CHECK_THROWS_AS(window_instants(p, 35, 10), InputDomainError);
}

TEST_CASE("edge ensembles and thinness") {
  const std::size_t n = 32;
  SUBCASE("identical members") {
    const auto f = square_frame(n, 8, 8, 12);
    const auto seq = sequence_of({f, f, f, f}, n);
    const std::vector<std::size_t> inst{0, 1, 2, 3};
    const EdgeEnsemble e = ensemble_edges(seq, inst);
    CHECK(e.count() == 4);
    CHECK(e.union_map.mask == e.members[0].mask);
    CHECK(thinness(e) == 1.0);
  }
  SUBCASE("single instant is one Canny map") {
    const auto f = square_frame(n, 4, 10, 9);
    const auto seq = sequence_of({f, square_frame(n, 0, 0, 3)}, n);
    const std::vector<std::size_t> inst{0};
    const EdgeEnsemble e = ensemble_edges(seq, inst);
    CHECK(e.union_map.mask == canny(f, n, n).mask);
    CHECK(thinness(e) == 1.0);
  }
  SUBCASE("disjoint members") {
    // Equal squares in separate corners: edges never touch.
    const auto seq = sequence_of({square_frame(n, 2, 2, 8), square_frame(n, 2, 22, 8), square_frame(n, 22, 2, 8),
                                  square_frame(n, 22, 22, 8)},
                                 n);
    const std::vector<std::size_t> inst{0, 1, 2, 3};
    const EdgeEnsemble e = ensemble_edges(seq, inst);
    for (const auto& m : e.members) CHECK(m.count() == e.members[0].count());
    CHECK(thinness(e) == doctest::Approx(4.0));
  }
  SUBCASE("scattered members thicken the union") {
    Rng rng(21);
    std::vector<std::vector<float>> frames;
    for (int i = 0; i < 10; ++i) {
      const long dy = static_cast<long>(rng.below(7)) - 3, dx = static_cast<long>(rng.below(7)) - 3;
      frames.push_back(square_frame(n, 9 + dy, 9 + dx, 14));
    }
    const auto seq = sequence_of(frames, n);
    std::vector<std::size_t> inst(10);
    std::iota(inst.begin(), inst.end(), std::size_t{0});
    CHECK(thinness(ensemble_edges(seq, inst)) > 2.0);
  }
  SUBCASE("empty and invalid ensembles") {
    const auto seq = sequence_of({std::vector<float>(n * n, 0.2f)}, n);
    const EdgeEnsemble none = ensemble_edges(seq, std::vector<std::size_t>{});
    CHECK(none.empty());
    CHECK_THROWS_AS(thinness(none), InputDomainError);
    const std::vector<std::size_t> zero{0};
    CHECK_THROWS_AS(thinness(ensemble_edges(seq, zero)), InputDomainError);
    const std::vector<std::size_t> outside{1};
    CHECK_THROWS_AS(ensemble_edges(seq, outside), InputDomainError);
  }
}

TEST_CASE("PGM and conditioned pressure exports") {
  const auto dir = testing::scratch_dir("physval_io");
  const auto f = square_frame(16, 4, 4, 8);
  const EdgeMap e = canny(f, 16, 16);
  dataio::write_pgm(to_graymap(e), dir / "edges.pgm");
  const auto back = dataio::read_pgm(dir / "edges.pgm");
  CHECK(back.maxval == 1);
  CHECK(back.width == 16);
  CHECK(back.pixels == e.mask);

  const auto gray = dataio::to_graymap(f, 16, 16);
  CHECK(gray.pixels[4 * 16 + 4] == 255);
  CHECK(gray.pixels[0] == 0);

  {
    std::ofstream bad(dir / "bad.pgm", std::ios::binary);
    bad << "P5\n4 4\n1\n" << std::string(15, '\0');
  }
  CHECK_THROWS_AS(dataio::read_pgm(dir / "bad.pgm"), FormatError);
  {
    std::ofstream bad(dir / "ascii.pgm");
    bad << "P2\n1 1\n1\n0\n";
  }
  CHECK_THROWS_AS(dataio::read_pgm(dir / "ascii.pgm"), FormatError);

  const std::vector<double> norm{0.0, 0.9, 1.0, 0.0};
  write_conditioned_pressure_csv(norm, 500.0, dir / "cp.csv");
  const csv::Table t = csv::read(dir / "cp.csv");
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[2][t.column("time_s")] == 0.004);
  CHECK(t.rows[1][t.column("normalized_value")] == 0.9);
}
