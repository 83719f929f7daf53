#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>

namespace flamesentinel::binary_io {

// Little-endian primitives for the on-disk formats.

inline std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const std::uint32_t le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof le);
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void write_f32s(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) write_f32(out, v);
  }
}

inline bool read_u32(std::istream& in, std::uint32_t& v) {
  std::uint32_t le = 0;
  if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) return false;
  v = to_little(le);
  return true;
}

inline bool read_f32(std::istream& in, float& v) {
  std::uint32_t bits = 0;
  if (!read_u32(in, bits)) return false;
  v = std::bit_cast<float>(bits);
  return true;
}

inline bool read_f32s(std::istream& in, std::span<float> values) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
    return false;
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : values) v = std::bit_cast<float>(to_little(std::bit_cast<std::uint32_t>(v)));
  }
  return true;
}

}  // namespace flamesentinel::binary_io
