#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "flamesentinel/core/tensor.hpp"

namespace flamesentinel::dataio {

/// Grayscale video, frame-major then row-major; intensities in [0,1].
struct FrameSequence {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double fps = 0.0;
  std::vector<float> values;
  nlohmann::json meta = nlohmann::json::object();

  FrameSequence() = default;
  FrameSequence(std::size_t count, std::size_t height, std::size_t width, double fps);

  std::size_t frame_size() const noexcept { return height * width; }
  std::span<float> frame(std::size_t t);
  std::span<const float> frame(std::size_t t) const;

  /// InputDomainError on empty extents, non-positive fps, a value count that
  /// disagrees with the extents, or an intensity outside [0,1].
  void validate() const;
};

/// Scalar pressure record, one value per frame.
struct PressureSeries {
  std::vector<double> values;
  double fps = 0.0;
};

/// CSV with header "time_s,pressure"; time_s = index / fps.
void write_pressure_csv(const PressureSeries& p, const std::filesystem::path& path);
/// FormatError on a malformed file; fps is recovered from the time column.
PressureSeries read_pressure_csv(const std::filesystem::path& path);

struct Roi {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct PreprocessSpec {
  std::optional<Roi> roi;  // full frame when empty
  std::size_t out_height = 64;
  std::size_t out_width = 64;
  /// Fixed raw intensity range mapped onto [0,1]; shared by every frame.
  double raw_min = 0.0;
  double raw_max = 1.0;
};

/// Crop, bilinear resize (pixel-centre aligned, edge clamped) and global
/// rescale of one raw frame. Results are clamped to [0,1].
std::vector<float> preprocess_frame(std::span<const float> frame, std::size_t height, std::size_t width,
                                    const PreprocessSpec& spec);

/// Applies preprocess_frame to every frame. The raw sequence may hold values
/// outside [0,1]; the result satisfies FrameSequence::validate.
FrameSequence preprocess(const FrameSequence& raw, const PreprocessSpec& spec);

struct SamplingSpec {
  std::size_t frames_per_sample = 16;  // N
  std::size_t stride = 16;             // k

  void validate() const;
};

struct VolumetricSample {
  std::size_t index = 0;        // j, zero-based
  std::size_t first_frame = 0;  // zero-based
  Tensor<float> voxels;         // [N, H, W]
};

/// floor((T - N) / k) + 1; InputDomainError when T < N.
std::size_t sample_count(std::size_t frames, const SamplingSpec& spec);

/// Sample j holds frames j*k .. j*k + N - 1. Trailing frames that cannot fill
/// a sample are dropped.
std::vector<VolumetricSample> make_volumes(const FrameSequence& seq, const SamplingSpec& spec);

/// Centre frame index of sample j (midpoint of its first and last frame).
double sample_center_frame(std::size_t j, const SamplingSpec& spec);

/// Stacks the listed samples into a model batch [B, N, H, W, 1].
Tensor<float> stack_batch(std::span<const VolumetricSample> samples, std::span<const std::size_t> order);
Tensor<float> stack_batch(std::span<const VolumetricSample> samples);

/// FVID: "FVID", u32 version (1), u32 T, u32 H, u32 W, f32 fps, u32 M,
/// M bytes of JSON metadata, T*H*W f32. All little-endian.
void write_fvid(const FrameSequence& seq, const std::filesystem::path& path);
/// FormatError on bad magic/version, truncated or oversized payload, invalid
/// metadata, or values that are non-finite or outside [0,1].
FrameSequence read_fvid(const std::filesystem::path& path);

}  // namespace flamesentinel::dataio
