#pragma once

#include <memory>
#include <vector>

#include "flamesentinel/nn/layers.hpp"

namespace flamesentinel::nn {

/// Ordered layer stack.
template <class T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <class L, class... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  void push(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }
  const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (mode == Mode::infer) return infer(x);
    Tensor<T> h = x;
    for (auto& layer : layers_) h = layer->forward(h, Mode::train);
    return h;
  }

  Tensor<T> infer(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (const auto& layer : layers_) h = layer->infer(h);
    return h;
  }

  /// Returns dL/dinput, or an empty tensor when the first layer skips it.
  Tensor<T> backward(const Tensor<T>& grad_out) {
    Tensor<T> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (auto& layer : layers_) {
      for (auto* p : layer->parameters()) out.push_back(p);
    }
    return out;
  }

  std::vector<Buffer<T>> buffers() {
    std::vector<Buffer<T>> out;
    for (auto& layer : layers_) {
      for (auto& b : layer->buffers()) out.push_back(b);
    }
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->grad.fill(T{0});
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  /// Gives every dropout layer a distinct stream derived from seed.
  void reseed_dropout(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (auto* d = dynamic_cast<Dropout<T>*>(layers_[i].get())) d->reseed(mix_seed(seed, i));
    }
  }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& layer : layers_) out.push_back(layer->spec());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Copies parameter values and buffers between two identically structured
/// stacks (typically float <-> double).
template <class To, class From>
void copy_state(Sequential<From>& src, Sequential<To>& dst) {
  auto sp = src.parameters();
  auto dp = dst.parameters();
  auto sb = src.buffers();
  auto db = dst.buffers();
  if (sp.size() != dp.size() || sb.size() != db.size()) throw ShapeError("copy_state: structure mismatch");
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (sp[i]->value.shape() != dp[i]->value.shape()) throw ShapeError("copy_state: shape mismatch");
    dp[i]->value = tensor_cast<To>(sp[i]->value);
  }
  for (std::size_t i = 0; i < sb.size(); ++i) *db[i].tensor = tensor_cast<To>(*sb[i].tensor);
}

}  // namespace flamesentinel::nn
