#include "flamesentinel/dataio/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "flamesentinel/core/error.hpp"

namespace flamesentinel::dataio {

void write_pgm(const Graymap& image, const std::filesystem::path& path) {
  if (image.pixels.size() != image.height * image.width) throw ShapeError("graymap pixel count does not match extents");
  if (image.maxval == 0 || image.maxval > 255) throw InputDomainError("graymap maxval must lie in [1,255]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Graymap read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  // Header tokens are separated by whitespace; '#' starts a comment line.
  auto token = [&]() {
    while (pos < data.size()) {
      if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw FormatError("PGM " + std::string(what) + " is not a number in " + path.string());
    }
    return std::stoul(t);
  };
  if (token() != "P5") throw FormatError(path.string() + " is not a binary PGM");
  Graymap g;
  g.width = number("width");
  g.height = number("height");
  const unsigned long maxval = number("maxval");
  if (maxval == 0 || maxval > 255) throw FormatError("unsupported PGM maxval in " + path.string());
  g.maxval = static_cast<unsigned>(maxval);
  if (pos >= data.size()) throw FormatError("PGM header is truncated in " + path.string());
  ++pos;  // single whitespace before the raster
  if (data.size() - pos != g.width * g.height) throw FormatError("PGM raster size mismatch in " + path.string());
  g.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end());
  for (auto p : g.pixels) {
    if (p > g.maxval) throw FormatError("PGM value above maxval in " + path.string());
  }
  return g;
}

Graymap to_graymap(std::span<const float> frame, std::size_t height, std::size_t width) {
  if (frame.size() != height * width) throw ShapeError("frame size does not match extents");
  Graymap g;
  g.height = height;
  g.width = width;
  g.pixels.resize(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double v = std::clamp(static_cast<double>(frame[i]), 0.0, 1.0);
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return g;
}

}  // namespace flamesentinel::dataio
