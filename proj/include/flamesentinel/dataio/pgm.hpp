#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace flamesentinel::dataio {

/// Binary (P5) graymap.
struct Graymap {
  std::size_t height = 0;
  std::size_t width = 0;
  unsigned maxval = 255;
  std::vector<std::uint8_t> pixels;  // row-major, each <= maxval
};

void write_pgm(const Graymap& image, const std::filesystem::path& path);
/// FormatError on anything but a P5 file with maxval < 256 and exact payload.
Graymap read_pgm(const std::filesystem::path& path);

/// Intensities in [0,1] quantised to maxval 255 (values are clamped).
Graymap to_graymap(std::span<const float> frame, std::size_t height, std::size_t width);

}  // namespace flamesentinel::dataio
