#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "flamesentinel/core/rng.hpp"
#include "flamesentinel/core/tensor.hpp"

namespace flamesentinel::testing {

template <class T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// max |a - b| / max(max |b|, floor)
template <class T>
double scaled_max_diff(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-12) {
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  return diff / scale;
}

/// Fresh scratch directory under the build tree's temp location.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("flamesentinel_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace flamesentinel::testing
