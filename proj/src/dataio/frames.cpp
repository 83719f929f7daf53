#include "flamesentinel/dataio/frames.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "flamesentinel/core/binary_io.hpp"
#include "flamesentinel/core/csv.hpp"

namespace flamesentinel::dataio {

namespace {

constexpr char kMagic[4] = {'F', 'V', 'I', 'D'};
constexpr std::uint32_t kVersion = 1;

std::string extents(std::size_t t, std::size_t h, std::size_t w) {
  return std::to_string(t) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace

FrameSequence::FrameSequence(std::size_t count_, std::size_t height_, std::size_t width_, double fps_)
    : count(count_), height(height_), width(width_), fps(fps_), values(count_ * height_ * width_, 0.0f) {}

std::span<float> FrameSequence::frame(std::size_t t) {
  return std::span<float>(values).subspan(t * frame_size(), frame_size());
}

std::span<const float> FrameSequence::frame(std::size_t t) const {
  return std::span<const float>(values).subspan(t * frame_size(), frame_size());
}

void FrameSequence::validate() const {
  if (count == 0 || height == 0 || width == 0) {
    throw InputDomainError("frame sequence extents must be positive, got " + extents(count, height, width));
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw InputDomainError("fps must be positive");
  if (values.size() != count * height * width) {
    throw InputDomainError("frame sequence holds " + std::to_string(values.size()) + " values for extents " +
                           extents(count, height, width));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw InputDomainError("intensity " + std::to_string(v) + " at flat index " + std::to_string(i) +
                             " is outside [0,1]");
    }
  }
}

std::vector<float> preprocess_frame(std::span<const float> frame, std::size_t height, std::size_t width,
                                    const PreprocessSpec& spec) {
  if (frame.size() != height * width || height == 0 || width == 0) {
    throw InputDomainError("frame holds " + std::to_string(frame.size()) + " values for " + std::to_string(height) +
                           "x" + std::to_string(width));
  }
  const Roi roi = spec.roi.value_or(Roi{0, 0, height, width});
  if (roi.height == 0 || roi.width == 0 || roi.top + roi.height > height || roi.left + roi.width > width) {
    throw InputDomainError("roi (" + std::to_string(roi.top) + "," + std::to_string(roi.left) + ") " +
                           std::to_string(roi.height) + "x" + std::to_string(roi.width) + " is outside the " +
                           std::to_string(height) + "x" + std::to_string(width) + " frame");
  }
  if (spec.out_height == 0 || spec.out_width == 0) throw InputDomainError("output size must be positive");
  if (!(spec.raw_max > spec.raw_min)) throw InputDomainError("raw_max must exceed raw_min");

  const double sy = static_cast<double>(roi.height) / static_cast<double>(spec.out_height);
  const double sx = static_cast<double>(roi.width) / static_cast<double>(spec.out_width);
  const double range = spec.raw_max - spec.raw_min;
  auto at = [&](std::size_t y, std::size_t x) {
    return static_cast<double>(frame[(roi.top + y) * width + roi.left + x]);
  };

  std::vector<float> out(spec.out_height * spec.out_width);
  for (std::size_t oy = 0; oy < spec.out_height; ++oy) {
    const double fy = std::clamp((static_cast<double>(oy) + 0.5) * sy - 0.5, 0.0, static_cast<double>(roi.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, roi.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < spec.out_width; ++ox) {
      const double fx = std::clamp((static_cast<double>(ox) + 0.5) * sx - 0.5, 0.0, static_cast<double>(roi.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, roi.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * wx;
      const double bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * wx;
      const double v = top + (bottom - top) * wy;
      out[oy * spec.out_width + ox] = static_cast<float>(std::clamp((v - spec.raw_min) / range, 0.0, 1.0));
    }
  }
  return out;
}

FrameSequence preprocess(const FrameSequence& raw, const PreprocessSpec& spec) {
  FrameSequence out(raw.count, spec.out_height, spec.out_width, raw.fps);
  out.meta = raw.meta;
  for (std::size_t t = 0; t < raw.count; ++t) {
    const auto f = preprocess_frame(raw.frame(t), raw.height, raw.width, spec);
    std::copy(f.begin(), f.end(), out.frame(t).begin());
  }
  return out;
}

void SamplingSpec::validate() const {
  if (frames_per_sample == 0 || stride == 0) {
    throw InputDomainError("sampling needs N >= 1 and k >= 1, got N=" + std::to_string(frames_per_sample) +
                           " k=" + std::to_string(stride));
  }
}

std::size_t sample_count(std::size_t frames, const SamplingSpec& spec) {
  spec.validate();
  if (frames < spec.frames_per_sample) {
    throw InputDomainError("sequence of " + std::to_string(frames) + " frames is shorter than N=" +
                           std::to_string(spec.frames_per_sample));
  }
  return (frames - spec.frames_per_sample) / spec.stride + 1;
}

std::vector<VolumetricSample> make_volumes(const FrameSequence& seq, const SamplingSpec& spec) {
  const std::size_t n = sample_count(seq.count, spec);
  const std::size_t frame_size = seq.frame_size();
  std::vector<VolumetricSample> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    VolumetricSample s;
    s.index = j;
    s.first_frame = j * spec.stride;
    const auto begin = seq.values.begin() + static_cast<std::ptrdiff_t>(s.first_frame * frame_size);
    s.voxels = Tensor<float>({spec.frames_per_sample, seq.height, seq.width},
                             std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(spec.frames_per_sample * frame_size)));
    out.push_back(std::move(s));
  }
  return out;
}

double sample_center_frame(std::size_t j, const SamplingSpec& spec) {
  return static_cast<double>(j * spec.stride) + 0.5 * static_cast<double>(spec.frames_per_sample - 1);
}

Tensor<float> stack_batch(std::span<const VolumetricSample> samples, std::span<const std::size_t> order) {
  if (order.empty()) throw ShapeError("cannot stack an empty batch");
  const Shape& s = samples[order.front()].voxels.shape();
  Tensor<float> batch({order.size(), s[0], s[1], s[2], 1});
  const std::size_t per = element_count(s);
  for (std::size_t b = 0; b < order.size(); ++b) {
    const auto& v = samples[order[b]].voxels;
    if (v.shape() != s) throw ShapeError("samples in a batch must share a shape");
    std::copy(v.values().begin(), v.values().end(), batch.data() + b * per);
  }
  return batch;
}

Tensor<float> stack_batch(std::span<const VolumetricSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return stack_batch(samples, order);
}

void write_fvid(const FrameSequence& seq, const std::filesystem::path& path) {
  seq.validate();
  constexpr auto u32_max = std::numeric_limits<std::uint32_t>::max();
  if (seq.count > u32_max || seq.height > u32_max || seq.width > u32_max) {
    throw InputDomainError("sequence extents exceed the FVID header range");
  }
  const std::string meta = seq.meta.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  binary_io::write_u32(out, kVersion);
  binary_io::write_u32(out, static_cast<std::uint32_t>(seq.count));
  binary_io::write_u32(out, static_cast<std::uint32_t>(seq.height));
  binary_io::write_u32(out, static_cast<std::uint32_t>(seq.width));
  binary_io::write_f32(out, static_cast<float>(seq.fps));
  binary_io::write_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  binary_io::write_f32s(out, seq.values);
  if (!out) throw Error("failed writing " + path.string());
}

FrameSequence read_fvid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4] = {};
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 4, kMagic)) {
    throw FormatError(path.string() + ": not an FVID file (bad magic)");
  }
  std::uint32_t version = 0, t = 0, h = 0, w = 0, m = 0;
  float fps = 0.0f;
  if (!binary_io::read_u32(in, version) || !binary_io::read_u32(in, t) || !binary_io::read_u32(in, h) ||
      !binary_io::read_u32(in, w) || !binary_io::read_f32(in, fps) || !binary_io::read_u32(in, m)) {
    throw FormatError(path.string() + ": truncated header");
  }
  if (version != kVersion) throw FormatError(path.string() + ": unsupported FVID version " + std::to_string(version));
  if (t == 0 || h == 0 || w == 0) throw FormatError(path.string() + ": zero extent in header");
  if (!(fps > 0.0f) || !std::isfinite(fps)) throw FormatError(path.string() + ": invalid fps");

  const auto header_bytes = static_cast<std::uintmax_t>(4 + 6 * 4) + m;
  const std::uintmax_t payload = static_cast<std::uintmax_t>(t) * h * w * sizeof(float);
  const std::uintmax_t actual = std::filesystem::file_size(path);
  if (actual < header_bytes + payload) {
    throw FormatError(path.string() + ": truncated payload (" + std::to_string(actual) + " bytes, expected " +
                      std::to_string(header_bytes + payload) + ")");
  }
  if (actual > header_bytes + payload) throw FormatError(path.string() + ": trailing bytes after payload");

  std::string meta(m, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(m));
  FrameSequence seq(t, h, w, static_cast<double>(fps));
  try {
    seq.meta = m == 0 ? nlohmann::json::object() : nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": metadata is not valid JSON: " + e.what());
  }
  if (!binary_io::read_f32s(in, seq.values)) throw FormatError(path.string() + ": truncated payload");
  for (float v : seq.values) {
    if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite intensity");
    if (v < 0.0f || v > 1.0f) throw FormatError(path.string() + ": intensity outside [0,1]");
  }
  return seq;
}

}  // namespace flamesentinel::dataio

namespace flamesentinel::dataio {

void write_pressure_csv(const PressureSeries& p, const std::filesystem::path& path) {
  if (!(p.fps > 0.0)) throw InputDomainError("pressure series needs a positive fps");
  csv::Writer w(path, {"time_s", "pressure"});
  for (std::size_t i = 0; i < p.values.size(); ++i) w.row({static_cast<double>(i) / p.fps, p.values[i]});
  w.close();
}

PressureSeries read_pressure_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t tc = t.column("time_s");
  const std::size_t pc = t.column("pressure");
  PressureSeries p;
  for (const auto& row : t.rows) {
    if (!std::isfinite(row[pc])) throw FormatError(path.string() + ": non-finite pressure");
    p.values.push_back(row[pc]);
  }
  if (t.rows.size() < 2) throw FormatError(path.string() + ": need at least two pressure samples");
  const double span = t.rows.back()[tc] - t.rows.front()[tc];
  if (!(span > 0.0)) throw FormatError(path.string() + ": time column must increase");
  // Rounded to micro-hertz so rates written as index/fps come back exactly.
  p.fps = std::round(static_cast<double>(t.rows.size() - 1) / span * 1e6) / 1e6;
  return p;
}

}  // namespace flamesentinel::dataio
