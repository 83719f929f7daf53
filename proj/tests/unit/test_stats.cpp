#include <doctest.h>

#include <cmath>
#include <fstream>

#include "flamesentinel/core/csv.hpp"
#include "flamesentinel/core/error.hpp"
#include "flamesentinel/core/rng.hpp"
#include "flamesentinel/stats/stats.hpp"
#include "support.hpp"

using namespace flamesentinel;
using namespace flamesentinel::stats;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = mean + sd * rng.normal();
  return v;
}

// Brute-force pairwise statistic.
double auc_pairs(const std::vector<double>& neg, const std::vector<double>& pos) {
  double s = 0.0;
  for (double p : pos)
    for (double n : neg) s += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return s / static_cast<double>(neg.size() * pos.size());
}

}  // namespace

TEST_CASE("kde of two points at +-1 with unit bandwidth") {
  const std::vector<double> v{-1.0, 1.0};
  const Density d = kde(v, 1.0);
  // p(0) = phi(1) = exp(-1/2) / sqrt(2 pi)
  CHECK(d.at(0.0) == doctest::Approx(0.2419707245).epsilon(1e-9));
  CHECK(d.lower() == doctest::Approx(-4.0));
  CHECK(d.upper() == doctest::Approx(4.0));
  CHECK(d.grid.size() == 512);
  CHECK(d.at(4.5) == 0.0);
  // The table agrees with the exact estimate at the grid nodes.
  for (std::size_t i = 0; i < d.grid.size(); i += 37) CHECK(d.values[i] == doctest::Approx(d.at(d.grid[i])));
}

TEST_CASE("kde integrates to about one") {
  const auto v = normal_sample(300, 1);
  const Density d = kde(v);
  // The +-3h support truncation loses at most 2 Phi(-3) of the mass.
  CHECK(integral(d) == doctest::Approx(1.0).epsilon(3e-3));
  CHECK(integral(d) <= 1.0 + 1e-6);
}

TEST_CASE("kde is translation equivariant") {
  const auto v = normal_sample(50, 2);
  std::vector<double> shifted(v);
  for (double& x : shifted) x += 12.5;
  const Density a = kde(v), b = kde(shifted);
  CHECK(b.bandwidth == doctest::Approx(a.bandwidth).epsilon(1e-12));
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    CHECK(b.grid[i] == doctest::Approx(a.grid[i] + 12.5).epsilon(1e-12));
    CHECK(b.values[i] == doctest::Approx(a.values[i]).epsilon(1e-9));
  }
}

TEST_CASE("silverman bandwidth") {
  // mean 4, sample sd sqrt(50/4); quartiles (linear interpolation) 2 and 4.
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 10.0};
  const double spread = std::min(std::sqrt(12.5), 2.0 / 1.34);
  CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * spread * std::pow(5.0, -0.2)).epsilon(1e-12));

  // Zero IQR with non-zero sd falls back to the sd.
  const std::vector<double> ties{0, 0, 0, 0, 0, 0, 1};
  const double sd = std::sqrt((6.0 * (1.0 / 49.0) + 36.0 / 49.0) / 6.0);
  CHECK(silverman_bandwidth(ties) == doctest::Approx(0.9 * sd * std::pow(7.0, -0.2)).epsilon(1e-12));

  const std::vector<double> flat{3.0, 3.0, 3.0};
  CHECK(silverman_bandwidth(flat) == doctest::Approx(0.03));
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(silverman_bandwidth(zeros) == doctest::Approx(1e-6));

  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(silverman_bandwidth(one), InputDomainError);
  CHECK_THROWS_AS(kde(one), InputDomainError);
  CHECK_THROWS_AS(kde(v, -1.0), InputDomainError);
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(kde(bad), InputDomainError);
}

TEST_CASE("overlap of reference density pairs") {
  const auto v = normal_sample(100, 3);
  const Density d = kde(v);
  CHECK(overlap(d, d) == doctest::Approx(integral(d)).epsilon(1e-3));

  const std::vector<double> at0{0.0, 0.0}, at100{100.0, 100.0}, at2{2.0, 2.0};
  CHECK(overlap(kde(at0, 1.0), kde(at100, 1.0)) == 0.0);

  // N(0,1) vs N(2,1): 2 Phi(-1), less the tails cut at +-3 sd by the supports.
  const double expected = 2.0 * (phi_cdf(-1.0) - phi_cdf(-3.0));
  CHECK(overlap(kde(at0, 1.0), kde(at2, 1.0)) == doctest::Approx(expected).epsilon(1e-4));
  CHECK(overlap(kde(at2, 1.0), kde(at0, 1.0)) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("auc matches the pairwise definition and ignores monotone maps") {
  const auto neg = normal_sample(60, 4);
  const auto pos = normal_sample(45, 5, 0.7);
  const double a = auc(neg, pos);
  CHECK(a == doctest::Approx(auc_pairs(neg, pos)).epsilon(1e-12));

  std::vector<double> eneg(neg), epos(pos);
  for (double& x : eneg) x = std::exp(3.0 * x) + 5.0;
  for (double& x : epos) x = std::exp(3.0 * x) + 5.0;
  CHECK(auc(eneg, epos) == doctest::Approx(a).epsilon(1e-12));

  const std::vector<double> lo{1, 2, 3}, hi{4, 5}, tie{2, 2};
  CHECK(auc(lo, hi) == 1.0);
  CHECK(auc(hi, lo) == 0.0);
  CHECK(auc(tie, tie) == 0.5);
  const std::vector<double> mixed{1, 2, 2, 3};
  CHECK(auc(mixed, tie) == doctest::Approx(auc_pairs(mixed, tie)));
}

TEST_CASE("separation report") {
  std::vector<double> raw = normal_sample(80, 6);
  std::vector<double> out = normal_sample(80, 7);
  for (std::size_t i = 40; i < 80; ++i) {
    raw[i] += 0.2;  // barely separated
    out[i] += 8.0;  // fully separated
  }
  const SeparationReport r = separation_report(raw, out, 40);
  CHECK(r.stable_count == 40);
  CHECK(r.unstable_count == 40);
  CHECK(r.raw.overlap > 0.5);
  CHECK(r.output.overlap < 0.01);
  CHECK(r.output.auc == 1.0);
  CHECK(r.reduction_factor() == doctest::Approx(r.raw.overlap / std::max(r.output.overlap, 1e-3)));
  CHECK(r.output.unstable_mean > r.output.stable_mean + 7.0);

  const auto j = to_json(r);
  CHECK(j.at("raw").at("overlap").get<double>() == doctest::Approx(r.raw.overlap));
  CHECK(j.at("output").at("auc").get<double>() == 1.0);
  CHECK(j.at("overlap_reduction_factor").get<double>() == doctest::Approx(r.reduction_factor()));

  CHECK_THROWS_AS(separation_report(raw, out, 0), InputDomainError);
  CHECK_THROWS_AS(separation_report(raw, out, 79), InputDomainError);
  CHECK_THROWS_AS(separation_report(raw, std::span(out).first(50), 20), InputDomainError);

  const auto dir = testing::scratch_dir("density");
  write_density_csv(r.output, dir / "density.csv", 256);
  const csv::Table t = csv::read(dir / "density.csv");
  REQUIRE(t.rows.size() == 256);
  const std::size_t x = t.column("x"), ps = t.column("p_stable"), pu = t.column("p_unstable");
  CHECK(t.rows.front()[x] <= r.output.stable.lower());
  CHECK(t.rows.back()[x] >= r.output.unstable.upper());
  for (const auto& row : t.rows) {
    CHECK(row[ps] == doctest::Approx(r.output.stable.at(row[x])));
    CHECK(row[pu] == doctest::Approx(r.output.unstable.at(row[x])));
  }
}
