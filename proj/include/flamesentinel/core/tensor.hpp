#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flamesentinel/core/error.hpp"

namespace flamesentinel {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape);

/// Dense row-major tensor. Activations use the rank-5 layout
/// [batch, depth, height, width, channels]; 2D data has depth 1.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_extents();
    if (values_.size() != element_count(shape_)) {
      throw ShapeError("tensor value count " + std::to_string(values_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  /// Reinterprets the extents; the element count must not change.
  void reshape(Shape shape) {
    if (element_count(shape) != values_.size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) throw ShapeError("tensor extents must be positive: " + to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> values_;
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return Tensor<To>(t.shape(), std::move(out));
}

/// Extents of a rank-5 activation tensor.
struct Extents5 {
  std::size_t n, d, h, w, c;

  std::size_t voxels() const noexcept { return d * h * w; }
};

template <class T>
Extents5 extents5(const Tensor<T>& t) {
  if (t.rank() != 5) throw ShapeError("expected rank-5 activation, got " + to_string(t.shape()));
  return {t.extent(0), t.extent(1), t.extent(2), t.extent(3), t.extent(4)};
}

}  // namespace flamesentinel
