#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flamesentinel/core/rng.hpp"
#include "flamesentinel/core/tensor.hpp"

namespace flamesentinel::nn {

enum class Mode { train, infer };

enum class LayerKind {
  conv3d,
  conv2d,
  batchnorm,
  relu,
  sigmoid,
  maxpool3d,
  maxpool2d,
  upsample3d,
  upsample2d,
  dropout,
};

std::string_view to_string(LayerKind kind);
using flamesentinel::to_string;

using Extent3 = std::array<std::size_t, 3>;  // depth, height, width

/// Static description of a layer, as listed in a model's layer table.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  Extent3 kernel{3, 3, 3};
  std::size_t channels_in = 0;
  std::size_t channels_out = 0;
  Extent3 pool{2, 2, 2};
  double rate = 0.0;
};

/// Trainable tensor with its accumulated gradient.
template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Non-trainable state carried in checkpoints (batch-norm running statistics).
template <class T>
struct Buffer {
  std::string name;
  Tensor<T>* tensor;
};

/// A differentiable stage over rank-5 activations. forward() in train mode
/// caches whatever backward() needs; infer() is const and safe to call
/// concurrently.
template <class T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const noexcept { return name_; }

  virtual LayerSpec spec() const = 0;

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return mode == Mode::train ? train_forward(x) : infer(x);
  }

  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

  virtual std::vector<Param<T>*> parameters() { return {}; }
  virtual std::vector<Buffer<T>> buffers() { return {}; }

 protected:
  virtual Tensor<T> train_forward(const Tensor<T>& x) = 0;

  void require_cache(bool present) const {
    if (!present) throw ShapeError(name_ + ": backward called without a cached train-mode forward");
  }

 private:
  std::string name_;
};

/// "Same"-padded stride-1 convolution. 2D convolution is the depth-1 kernel
/// case over depth-1 activations.
template <class T>
class Conv : public Layer<T> {
 public:
  Conv(std::string name, Extent3 kernel, std::size_t channels_in, std::size_t channels_out);

  LayerSpec spec() const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> parameters() override { return {&weight_, &bias_}; }

  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }

  /// The first layer of a network never needs dL/dx; skipping it saves a
  /// full convolution per step.
  void set_input_grad_enabled(bool enabled) noexcept { input_grad_ = enabled; }

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  void initialize_uniform(Rng& rng);

 protected:
  Tensor<T> train_forward(const Tensor<T>& x) override;

 private:
  Extent3 kernel_;
  std::size_t cin_, cout_;
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> cached_input_;
  bool input_grad_ = true;
};

template <class T>
class BatchNorm : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.1, double epsilon = 1e-5);

  LayerSpec spec() const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Buffer<T>> buffers() override;

  Param<T>& gamma() noexcept { return gamma_; }
  Param<T>& beta() noexcept { return beta_; }
  Tensor<T>& running_mean() noexcept { return running_mean_; }
  Tensor<T>& running_var() noexcept { return running_var_; }
  double epsilon() const noexcept { return epsilon_; }

 protected:
  Tensor<T> train_forward(const Tensor<T>& x) override;

 private:
  std::size_t channels_;
  double momentum_;
  double epsilon_;
  Param<T> gamma_;
  Param<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  Tensor<T> cached_xhat_;
  std::vector<T> cached_inv_std_;
};

template <class T>
class Relu : public Layer<T> {
 public:
  using Layer<T>::Layer;
  LayerSpec spec() const override { return {.kind = LayerKind::relu}; }
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 protected:
  Tensor<T> train_forward(const Tensor<T>& x) override;

 private:
  Tensor<T> cached_output_;
};

template <class T>
class Sigmoid : public Layer<T> {
 public:
  using Layer<T>::Layer;
  LayerSpec spec() const override { return {.kind = LayerKind::sigmoid}; }
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 protected:
  Tensor<T> train_forward(const Tensor<T>& x) override;

 private:
  Tensor<T> cached_output_;
};

/// Blockwise max. Gradient goes to the first maximal element in scan order.
template <class T>
class MaxPool : public Layer<T> {
 public:
  MaxPool(std::string name, Extent3 pool);
  LayerSpec spec() const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 protected:
  Tensor<T> train_forward(const Tensor<T>& x) override;

 private:
  Tensor<T> pool(const Tensor<T>& x, std::vector<std::size_t>* argmax) const;

  Extent3 pool_;
  Shape cached_input_shape_;
  std::vector<std::size_t> cached_argmax_;
};

/// Nearest-neighbour upsampling: each voxel repeated factor[d]×factor[h]×factor[w].
template <class T>
class Upsample : public Layer<T> {
 public:
  Upsample(std::string name, Extent3 factor);
  LayerSpec spec() const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 protected:
  Tensor<T> train_forward(const Tensor<T>& x) override;

 private:
  Extent3 factor_;
  Shape cached_input_shape_;
};

/// Inverted dropout: active only in train mode, kept units scaled by
/// 1/(1-rate). Masks are drawn from (seed, call counter).
template <class T>
class Dropout : public Layer<T> {
 public:
  Dropout(std::string name, double rate, std::uint64_t seed = 0);
  LayerSpec spec() const override;
  Tensor<T> infer(const Tensor<T>& x) const override { return x; }
  Tensor<T> backward(const Tensor<T>& grad_out) override;

  void reseed(std::uint64_t seed) noexcept {
    seed_ = seed;
    calls_ = 0;
  }

 protected:
  Tensor<T> train_forward(const Tensor<T>& x) override;

 private:
  double rate_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
  std::vector<T> cached_mask_;
};

template <class T>
struct Loss {
  T value;
  Tensor<T> grad;  // dL/dpred
};

/// Mean over all elements of (pred - target)^2, with its gradient.
template <class T>
Loss<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace flamesentinel::nn
