#include <doctest.h>

#include <fstream>
#include <set>

#include "flamesentinel/dataio/frames.hpp"
#include "support.hpp"

using namespace flamesentinel;
using namespace flamesentinel::dataio;

namespace {

FrameSequence random_sequence(std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed) {
  FrameSequence seq(t, h, w, 500.0);
  Rng rng(seed);
  for (auto& v : seq.values) v = static_cast<float>(rng.uniform());
  return seq;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("preprocess_frame") {
  TEST_CASE("same-size full-frame preprocessing is the identity") {
    const auto seq = random_sequence(1, 64, 64, 1);
    PreprocessSpec spec;
    const auto out = preprocess_frame(seq.frame(0), 64, 64, spec);
    CHECK(std::equal(out.begin(), out.end(), seq.frame(0).begin()));
    // Idempotent.
    const auto again = preprocess_frame(out, 64, 64, spec);
    CHECK(again == out);
  }

  TEST_CASE("constant frame stays constant under resize") {
    const std::vector<float> frame(16, 0.5f);
    PreprocessSpec spec;
    spec.out_height = spec.out_width = 2;
    const auto out = preprocess_frame(frame, 4, 4, spec);
    CHECK(out == std::vector<float>(4, 0.5f));
  }

  TEST_CASE("1024x1024 raw frame downsamples to 64x64 with a global raw range") {
    std::vector<float> frame(1024 * 1024);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<float>((i % 1024) / 4);  // 0..255
    PreprocessSpec spec;
    spec.raw_min = 0.0;
    spec.raw_max = 255.0;
    const auto out = preprocess_frame(frame, 1024, 1024, spec);
    REQUIRE(out.size() == 64 * 64);
    for (float v : out) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    // Output column c samples raw x = 16c + 7.5, between two pixels of value floor(x/4).
    CHECK(out[0] == doctest::Approx(1.5 / 255.0));
    CHECK(out[63] == doctest::Approx((1015.5 / 4 - 0.375) / 255.0).epsilon(1e-3));
  }

  TEST_CASE("2x downsample of a ramp averages pixel pairs") {
    // Pixel-centre alignment puts each output sample midway between two inputs.
    const std::vector<float> frame{0.0f, 0.2f, 0.4f, 0.6f};
    PreprocessSpec spec;
    spec.out_height = 1;
    spec.out_width = 2;
    const auto out = preprocess_frame(frame, 1, 4, spec);
    CHECK(out[0] == doctest::Approx(0.1));
    CHECK(out[1] == doctest::Approx(0.5));
  }

  TEST_CASE("roi crops before resizing") {
    std::vector<float> frame(6 * 6, 0.0f);
    for (std::size_t y = 2; y < 4; ++y)
      for (std::size_t x = 1; x < 4; ++x) frame[y * 6 + x] = 0.25f * static_cast<float>(x);
    PreprocessSpec spec;
    spec.roi = Roi{2, 1, 2, 3};
    spec.out_height = 2;
    spec.out_width = 3;
    const auto out = preprocess_frame(frame, 6, 6, spec);
    CHECK(out == std::vector<float>{0.25f, 0.5f, 0.75f, 0.25f, 0.5f, 0.75f});
  }

  TEST_CASE("roi outside the frame is rejected") {
    const std::vector<float> frame(16, 0.0f);
    PreprocessSpec spec;
    spec.roi = Roi{2, 2, 3, 2};
    CHECK_THROWS_AS(preprocess_frame(frame, 4, 4, spec), InputDomainError);
    spec.roi = Roi{0, 0, 0, 2};
    CHECK_THROWS_AS(preprocess_frame(frame, 4, 4, spec), InputDomainError);
  }

  TEST_CASE("whole-sequence preprocessing keeps fps and metadata") {
    FrameSequence raw(3, 8, 8, 250.0);
    for (std::size_t i = 0; i < raw.values.size(); ++i) raw.values[i] = static_cast<float>(i % 200);
    raw.meta = {{"scenario", "x"}};
    PreprocessSpec spec;
    spec.out_height = spec.out_width = 4;
    spec.raw_max = 200.0;
    const auto out = preprocess(raw, spec);
    CHECK(out.fps == 250.0);
    CHECK(out.meta == raw.meta);
    CHECK_NOTHROW(out.validate());
  }
}

TEST_SUITE("make_volumes") {
  TEST_CASE("18000 frames with N=k=16 give 1125 samples") {
    CHECK(sample_count(18000, {16, 16}) == 1125);
  }

  TEST_CASE("small cases") {
    CHECK(sample_count(16, {16, 16}) == 1);
    CHECK(sample_count(100, {16, 16}) == 6);
    CHECK(sample_count(100, {16, 4}) == 22);
    CHECK_THROWS_AS(sample_count(15, {16, 16}), InputDomainError);
    CHECK_THROWS_AS(sample_count(15, {16, 0}), InputDomainError);
  }

  TEST_CASE("T=N yields one sample holding every frame") {
    const auto seq = random_sequence(16, 4, 4, 2);
    const auto v = make_volumes(seq, {16, 16});
    REQUIRE(v.size() == 1);
    CHECK(std::equal(v[0].voxels.values().begin(), v[0].voxels.values().end(), seq.values.begin()));
  }

  TEST_CASE("100 frames drop the last 4") {
    const auto seq = random_sequence(100, 2, 3, 3);
    const auto v = make_volumes(seq, {16, 16});
    REQUIRE(v.size() == 6);
    CHECK(v.back().first_frame == 80);
    CHECK(v.back().voxels.shape() == Shape{16, 2, 3});
  }

  TEST_CASE("randomized partition and reassembly") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.below(20);
      const std::size_t k = 1 + rng.below(20);
      const std::size_t t = n + rng.below(120);
      FrameSequence seq(t, 1, 2, 100.0);
      for (std::size_t i = 0; i < seq.values.size(); ++i) seq.values[i] = static_cast<float>(i / 2) / 1000.0f;
      const auto v = make_volumes(seq, {n, k});
      REQUIRE(v.size() == (t - n) / k + 1);
      std::multiset<std::size_t> seen;
      for (const auto& s : v) {
        CHECK(s.first_frame == s.index * k);
        for (std::size_t f = 0; f < n; ++f) {
          // Frame identity is encoded in its value.
          const auto id = static_cast<std::size_t>(std::lround(s.voxels[f * 2] * 1000.0f));
          CHECK(id == s.first_frame + f);
          seen.insert(id);
        }
      }
      if (k == n) {
        // Every frame of the truncated prefix exactly once; concatenation restores it.
        const std::size_t kept = (t / n) * n;
        CHECK(seen.size() == kept);
        for (std::size_t f = 0; f < kept; ++f) CHECK(seen.count(f) == 1);
        std::vector<float> joined;
        for (const auto& s : v) joined.insert(joined.end(), s.voxels.values().begin(), s.voxels.values().end());
        CHECK(std::equal(joined.begin(), joined.end(), seq.values.begin()));
      }
    }
  }

  TEST_CASE("stack_batch builds a channels-last batch") {
    const auto seq = random_sequence(32, 4, 4, 4);
    const auto v = make_volumes(seq, {16, 16});
    const std::vector<std::size_t> order{1, 0};
    const auto batch = stack_batch(v, order);
    CHECK(batch.shape() == Shape{2, 16, 4, 4, 1});
    CHECK(batch[0] == v[1].voxels[0]);
    CHECK(batch[256] == v[0].voxels[0]);
  }

  TEST_CASE("sample centre frame") {
    CHECK(sample_center_frame(0, {16, 16}) == 7.5);
    CHECK(sample_center_frame(2, {16, 16}) == 39.5);
  }
}

TEST_SUITE("fvid") {
  TEST_CASE("round trip is bit-exact") {
    const auto dir = testing::scratch_dir("fvid");
    auto seq = random_sequence(8, 16, 16, 5);
    seq.meta = {{"scenario", "unit"}, {"transition_time", 4.0}};
    write_fvid(seq, dir / "a.fvid");
    const auto back = read_fvid(dir / "a.fvid");
    CHECK(back.count == 8);
    CHECK(back.height == 16);
    CHECK(back.width == 16);
    CHECK(back.fps == 500.0);
    CHECK(back.values == seq.values);
    CHECK(back.meta == seq.meta);
  }

  TEST_CASE("header layout") {
    const auto dir = testing::scratch_dir("fvid_layout");
    FrameSequence seq(2, 1, 3, 30.0);
    write_fvid(seq, dir / "a.fvid");
    const auto bytes = slurp(dir / "a.fvid");
    const std::string meta = "{}";
    REQUIRE(bytes.size() == 28 + meta.size() + 6 * 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FVID");
    CHECK(bytes[4] == 1);  // version, little-endian
    CHECK(bytes[8] == 2);
    CHECK(bytes[12] == 1);
    CHECK(bytes[16] == 3);
    CHECK(bytes[24] == 2);  // metadata length
  }

  TEST_CASE("bad magic, truncation and bad values are format errors") {
    const auto dir = testing::scratch_dir("fvid_bad");
    const auto seq = random_sequence(10, 4, 4, 6);
    write_fvid(seq, dir / "ok.fvid");
    auto bytes = slurp(dir / "ok.fvid");

    auto bad = bytes;
    std::copy_n("XXXX", 4, bad.begin());
    spit(dir / "magic.fvid", bad);
    CHECK_THROWS_AS(read_fvid(dir / "magic.fvid"), FormatError);

    // Declares T=10 but carries 9 frames.
    bad.assign(bytes.begin(), bytes.end() - 16 * 4);
    spit(dir / "short.fvid", bad);
    CHECK_THROWS_AS(read_fvid(dir / "short.fvid"), FormatError);

    bad = bytes;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + bad.size() - 4, &nan, 4);
    spit(dir / "nan.fvid", bad);
    CHECK_THROWS_AS(read_fvid(dir / "nan.fvid"), FormatError);

    bad = bytes;
    bad.push_back(0);
    spit(dir / "long.fvid", bad);
    CHECK_THROWS_AS(read_fvid(dir / "long.fvid"), FormatError);

    CHECK_THROWS_AS(read_fvid(dir / "absent.fvid"), FormatError);
  }

  TEST_CASE("out-of-range intensities are rejected on write") {
    const auto dir = testing::scratch_dir("fvid_range");
    FrameSequence seq(1, 1, 2, 30.0);
    seq.values = {0.5f, 1.5f};
    CHECK_THROWS_AS(write_fvid(seq, dir / "a.fvid"), InputDomainError);
  }
}
