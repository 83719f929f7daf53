#include "flamesentinel/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "flamesentinel/core/parallel.hpp"
#include "flamesentinel/kernels/kernels.hpp"

namespace flamesentinel::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::maxpool3d: return "maxpool3d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::upsample3d: return "upsample3d";
    case LayerKind::upsample2d: return "upsample2d";
    case LayerKind::dropout: return "dropout";
  }
  return "unknown";
}

namespace {

template <class T>
void conv_forward(const kernels::ConvGeometry& g, const T* x, const T* w, const T* b, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active_kernels().conv_forward(g, x, w, b, y);
  } else {
    kernels::conv_forward_reference<T>(g, x, w, b, y);
  }
}

template <class T>
void conv_weight_grad(const kernels::ConvGeometry& g, const T* x, const T* gy, T* gw, T* gb) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active_kernels().conv_weight_grad(g, x, gy, gw, gb);
  } else {
    kernels::conv_weight_grad_reference<T>(g, x, gy, gw, gb);
  }
}

/// Runs a single-item convolution over every batch item, one task per item.
template <class T>
void conv_forward_batched(kernels::ConvGeometry g, const T* x, const T* w, const T* b, T* y) {
  const std::size_t batch = g.batch;
  g.batch = 1;
  const std::size_t in_stride = g.voxels() * g.in_channels;
  const std::size_t out_stride = g.voxels() * g.out_channels;
  parallel_for(batch, [&](std::size_t i) {
    conv_forward<T>(g, x + i * in_stride, w, b, y + i * out_stride);
  });
}

kernels::ConvGeometry geometry_for(const Extents5& e, const Extent3& kernel, std::size_t cout) {
  kernels::ConvGeometry g;
  g.batch = e.n;
  g.depth = e.d;
  g.height = e.h;
  g.width = e.w;
  g.in_channels = e.c;
  g.out_channels = cout;
  g.kd = kernel[0];
  g.kh = kernel[1];
  g.kw = kernel[2];
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv

template <class T>
Conv<T>::Conv(std::string name, Extent3 kernel, std::size_t channels_in, std::size_t channels_out)
    : Layer<T>(std::move(name)), kernel_(kernel), cin_(channels_in), cout_(channels_out) {
  for (auto k : kernel_) {
    if (k % 2 == 0) throw ShapeError(this->name() + ": kernel extents must be odd");
  }
  const Shape wshape{kernel_[0], kernel_[1], kernel_[2], cin_, cout_};
  weight_ = {this->name() + ".weight", Tensor<T>(wshape), Tensor<T>(wshape)};
  bias_ = {this->name() + ".bias", Tensor<T>({cout_}), Tensor<T>({cout_})};
}

template <class T>
LayerSpec Conv<T>::spec() const {
  LayerSpec s;
  s.kind = kernel_[0] == 1 ? LayerKind::conv2d : LayerKind::conv3d;
  s.kernel = kernel_;
  s.channels_in = cin_;
  s.channels_out = cout_;
  return s;
}

template <class T>
void Conv<T>::initialize_uniform(Rng& rng) {
  const double taps = static_cast<double>(kernel_[0] * kernel_[1] * kernel_[2]);
  const double limit = std::sqrt(6.0 / (taps * static_cast<double>(cin_) + taps * static_cast<double>(cout_)));
  for (auto& v : weight_.value.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  bias_.value.fill(T{0});
}

template <class T>
Tensor<T> Conv<T>::infer(const Tensor<T>& x) const {
  const Extents5 e = extents5(x);
  if (e.c != cin_) {
    throw ShapeError(this->name() + ": expected " + std::to_string(cin_) + " input channels, got " +
                     std::to_string(e.c));
  }
  Tensor<T> y({e.n, e.d, e.h, e.w, cout_});
  conv_forward_batched<T>(geometry_for(e, kernel_, cout_), x.data(), weight_.value.data(),
                          bias_.value.data(), y.data());
  return y;
}

template <class T>
Tensor<T> Conv<T>::train_forward(const Tensor<T>& x) {
  Tensor<T> y = infer(x);
  cached_input_ = x;
  return y;
}

template <class T>
Tensor<T> Conv<T>::backward(const Tensor<T>& grad_out) {
  this->require_cache(!cached_input_.empty());
  const Extents5 e = extents5(cached_input_);
  if (grad_out.shape() != Shape{e.n, e.d, e.h, e.w, cout_}) {
    throw ShapeError(this->name() + ": gradient shape " + to_string(grad_out.shape()) +
                     " does not match output");
  }
  kernels::ConvGeometry item = geometry_for(e, kernel_, cout_);
  item.batch = 1;
  const std::size_t in_stride = item.voxels() * cin_;
  const std::size_t out_stride = item.voxels() * cout_;

  // Per-item partial sums reduced in index order, so the result does not
  // depend on the worker count.
  std::vector<std::vector<T>> partial_w(e.n, std::vector<T>(weight_.value.size(), T{0}));
  std::vector<std::vector<T>> partial_b(e.n, std::vector<T>(cout_, T{0}));
  parallel_for(e.n, [&](std::size_t i) {
    conv_weight_grad<T>(item, cached_input_.data() + i * in_stride, grad_out.data() + i * out_stride,
                        partial_w[i].data(), partial_b[i].data());
  });
  for (std::size_t i = 0; i < e.n; ++i) {
    for (std::size_t k = 0; k < weight_.grad.size(); ++k) weight_.grad[k] += partial_w[i][k];
    for (std::size_t k = 0; k < cout_; ++k) bias_.grad[k] += partial_b[i][k];
  }

  if (!input_grad_) return {};
  std::vector<T> flipped(weight_.value.size());
  kernels::flip_kernel_for_input_grad<T>(item, weight_.value.data(), flipped.data());
  kernels::ConvGeometry back = geometry_for(e, kernel_, cin_);
  back.in_channels = cout_;
  back.out_channels = cin_;
  Tensor<T> grad_in(cached_input_.shape());
  conv_forward_batched<T>(back, grad_out.data(), flipped.data(), nullptr, grad_in.data());
  return grad_in;
}

// ---------------------------------------------------------------------------
// BatchNorm

template <class T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels, double momentum, double epsilon)
    : Layer<T>(std::move(name)),
      channels_(channels),
      momentum_(momentum),
      epsilon_(epsilon),
      running_mean_({channels}, T{0}),
      running_var_({channels}, T{1}) {
  gamma_ = {this->name() + ".gamma", Tensor<T>({channels}, T{1}), Tensor<T>({channels})};
  beta_ = {this->name() + ".beta", Tensor<T>({channels}), Tensor<T>({channels})};
}

template <class T>
LayerSpec BatchNorm<T>::spec() const {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  s.channels_in = channels_;
  s.channels_out = channels_;
  return s;
}

template <class T>
std::vector<Buffer<T>> BatchNorm<T>::buffers() {
  return {{this->name() + ".running_mean", &running_mean_},
          {this->name() + ".running_var", &running_var_}};
}

template <class T>
Tensor<T> BatchNorm<T>::infer(const Tensor<T>& x) const {
  const Extents5 e = extents5(x);
  if (e.c != channels_) throw ShapeError(this->name() + ": channel mismatch");
  std::vector<T> scale(channels_), shift(channels_);
  for (std::size_t c = 0; c < channels_; ++c) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + epsilon_);
    scale[c] = static_cast<T>(static_cast<double>(gamma_.value[c]) * inv);
    shift[c] = static_cast<T>(static_cast<double>(beta_.value[c]) -
                              static_cast<double>(running_mean_[c]) * static_cast<double>(gamma_.value[c]) * inv);
  }
  Tensor<T> y(x.shape());
  const std::size_t rows = x.size() / channels_;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * channels_;
    T* out = y.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) out[c] = in[c] * scale[c] + shift[c];
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm<T>::train_forward(const Tensor<T>& x) {
  const Extents5 e = extents5(x);
  if (e.c != channels_) throw ShapeError(this->name() + ": channel mismatch");
  const std::size_t rows = x.size() / channels_;
  if (rows < 2) {
    throw InputDomainError(this->name() + ": train-mode statistics need at least 2 values per channel");
  }
  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) mean[c] += static_cast<double>(in[c]);
  }
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      const double dlt = static_cast<double>(in[c]) - mean[c];
      var[c] += dlt * dlt;
    }
  }
  for (auto& v : var) v /= static_cast<double>(rows);

  cached_inv_std_.assign(channels_, T{0});
  std::vector<T> mu(channels_);
  for (std::size_t c = 0; c < channels_; ++c) {
    cached_inv_std_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + epsilon_));
    mu[c] = static_cast<T>(mean[c]);
    const double unbiased = var[c] * static_cast<double>(rows) / static_cast<double>(rows - 1);
    running_mean_[c] = static_cast<T>((1.0 - momentum_) * static_cast<double>(running_mean_[c]) + momentum_ * mean[c]);
    running_var_[c] = static_cast<T>((1.0 - momentum_) * static_cast<double>(running_var_[c]) + momentum_ * unbiased);
  }

  cached_xhat_ = Tensor<T>(x.shape());
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * channels_;
    T* xh = cached_xhat_.data() + r * channels_;
    T* out = y.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      xh[c] = (in[c] - mu[c]) * cached_inv_std_[c];
      out[c] = gamma_.value[c] * xh[c] + beta_.value[c];
    }
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& grad_out) {
  this->require_cache(!cached_xhat_.empty());
  if (!grad_out.same_shape(cached_xhat_)) throw ShapeError(this->name() + ": gradient shape mismatch");
  const std::size_t rows = grad_out.size() / channels_;
  std::vector<double> sum_g(channels_, 0.0), sum_gx(channels_, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* g = grad_out.data() + r * channels_;
    const T* xh = cached_xhat_.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      sum_g[c] += static_cast<double>(g[c]);
      sum_gx[c] += static_cast<double>(g[c]) * static_cast<double>(xh[c]);
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    gamma_.grad[c] += static_cast<T>(sum_gx[c]);
    beta_.grad[c] += static_cast<T>(sum_g[c]);
  }
  // dx = gamma * inv_std / M * (M g - sum(g) - xhat * sum(g xhat))
  const double m = static_cast<double>(rows);
  std::vector<T> k(channels_), mean_g(channels_), mean_gx(channels_);
  for (std::size_t c = 0; c < channels_; ++c) {
    k[c] = static_cast<T>(static_cast<double>(gamma_.value[c]) * static_cast<double>(cached_inv_std_[c]));
    mean_g[c] = static_cast<T>(sum_g[c] / m);
    mean_gx[c] = static_cast<T>(sum_gx[c] / m);
  }
  Tensor<T> grad_in(grad_out.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* g = grad_out.data() + r * channels_;
    const T* xh = cached_xhat_.data() + r * channels_;
    T* out = grad_in.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      out[c] = k[c] * (g[c] - mean_g[c] - xh[c] * mean_gx[c]);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Activations

template <class T>
Tensor<T> Relu<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <class T>
Tensor<T> Relu<T>::train_forward(const Tensor<T>& x) {
  cached_output_ = infer(x);
  return cached_output_;
}

template <class T>
Tensor<T> Relu<T>::backward(const Tensor<T>& grad_out) {
  this->require_cache(!cached_output_.empty());
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = cached_output_[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <class T>
Tensor<T> Sigmoid<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = T{1} / (T{1} + std::exp(-x[i]));
  return y;
}

template <class T>
Tensor<T> Sigmoid<T>::train_forward(const Tensor<T>& x) {
  cached_output_ = infer(x);
  return cached_output_;
}

template <class T>
Tensor<T> Sigmoid<T>::backward(const Tensor<T>& grad_out) {
  this->require_cache(!cached_output_.empty());
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const T s = cached_output_[i];
    g[i] = grad_out[i] * s * (T{1} - s);
  }
  return g;
}

// ---------------------------------------------------------------------------
// MaxPool

template <class T>
MaxPool<T>::MaxPool(std::string name, Extent3 pool) : Layer<T>(std::move(name)), pool_(pool) {}

template <class T>
LayerSpec MaxPool<T>::spec() const {
  LayerSpec s;
  s.kind = pool_[0] == 1 ? LayerKind::maxpool2d : LayerKind::maxpool3d;
  s.pool = pool_;
  return s;
}

template <class T>
Tensor<T> MaxPool<T>::pool(const Tensor<T>& x, std::vector<std::size_t>* argmax) const {
  const Extents5 e = extents5(x);
  if (e.d % pool_[0] || e.h % pool_[1] || e.w % pool_[2]) {
    throw ShapeError(this->name() + ": extents " + to_string(x.shape()) + " not divisible by pool");
  }
  const std::size_t od = e.d / pool_[0], oh = e.h / pool_[1], ow = e.w / pool_[2];
  Tensor<T> y({e.n, od, oh, ow, e.c});
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t n = 0; n < e.n; ++n) {
    for (std::size_t d = 0; d < od; ++d) {
      for (std::size_t h = 0; h < oh; ++h) {
        for (std::size_t w = 0; w < ow; ++w) {
          for (std::size_t c = 0; c < e.c; ++c, ++o) {
            std::size_t best_idx = 0;
            T best{};
            bool first = true;
            for (std::size_t a = 0; a < pool_[0]; ++a) {
              for (std::size_t b = 0; b < pool_[1]; ++b) {
                for (std::size_t cc = 0; cc < pool_[2]; ++cc) {
                  const std::size_t idx =
                      ((((n * e.d + d * pool_[0] + a) * e.h + h * pool_[1] + b) * e.w) + w * pool_[2] + cc) * e.c + c;
                  if (first || x[idx] > best) {
                    best = x[idx];
                    best_idx = idx;
                    first = false;
                  }
                }
              }
            }
            y[o] = best;
            if (argmax) (*argmax)[o] = best_idx;
          }
        }
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> MaxPool<T>::infer(const Tensor<T>& x) const {
  return pool(x, nullptr);
}

template <class T>
Tensor<T> MaxPool<T>::train_forward(const Tensor<T>& x) {
  Tensor<T> y = pool(x, &cached_argmax_);
  cached_input_shape_ = x.shape();
  return y;
}

template <class T>
Tensor<T> MaxPool<T>::backward(const Tensor<T>& grad_out) {
  this->require_cache(!cached_input_shape_.empty());
  if (grad_out.size() != cached_argmax_.size()) throw ShapeError(this->name() + ": gradient shape mismatch");
  Tensor<T> g(cached_input_shape_);
  for (std::size_t i = 0; i < grad_out.size(); ++i) g[cached_argmax_[i]] += grad_out[i];
  return g;
}

// ---------------------------------------------------------------------------
// Upsample

template <class T>
Upsample<T>::Upsample(std::string name, Extent3 factor) : Layer<T>(std::move(name)), factor_(factor) {}

template <class T>
LayerSpec Upsample<T>::spec() const {
  LayerSpec s;
  s.kind = factor_[0] == 1 ? LayerKind::upsample2d : LayerKind::upsample3d;
  s.pool = factor_;
  return s;
}

template <class T>
Tensor<T> Upsample<T>::infer(const Tensor<T>& x) const {
  const Extents5 e = extents5(x);
  const std::size_t od = e.d * factor_[0], oh = e.h * factor_[1], ow = e.w * factor_[2];
  Tensor<T> y({e.n, od, oh, ow, e.c});
  std::size_t o = 0;
  for (std::size_t n = 0; n < e.n; ++n) {
    for (std::size_t d = 0; d < od; ++d) {
      for (std::size_t h = 0; h < oh; ++h) {
        for (std::size_t w = 0; w < ow; ++w) {
          const T* src =
              x.data() + (((n * e.d + d / factor_[0]) * e.h + h / factor_[1]) * e.w + w / factor_[2]) * e.c;
          for (std::size_t c = 0; c < e.c; ++c) y[o++] = src[c];
        }
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> Upsample<T>::train_forward(const Tensor<T>& x) {
  cached_input_shape_ = x.shape();
  return infer(x);
}

template <class T>
Tensor<T> Upsample<T>::backward(const Tensor<T>& grad_out) {
  this->require_cache(!cached_input_shape_.empty());
  Tensor<T> g(cached_input_shape_);
  const Extents5 e = extents5(g);
  const Extents5 o = extents5(grad_out);
  if (o.d != e.d * factor_[0] || o.h != e.h * factor_[1] || o.w != e.w * factor_[2] || o.c != e.c) {
    throw ShapeError(this->name() + ": gradient shape mismatch");
  }
  std::size_t i = 0;
  for (std::size_t n = 0; n < o.n; ++n) {
    for (std::size_t d = 0; d < o.d; ++d) {
      for (std::size_t h = 0; h < o.h; ++h) {
        for (std::size_t w = 0; w < o.w; ++w) {
          T* dst = g.data() + (((n * e.d + d / factor_[0]) * e.h + h / factor_[1]) * e.w + w / factor_[2]) * e.c;
          for (std::size_t c = 0; c < e.c; ++c) dst[c] += grad_out[i++];
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dropout

template <class T>
Dropout<T>::Dropout(std::string name, double rate, std::uint64_t seed)
    : Layer<T>(std::move(name)), rate_(rate), seed_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InputDomainError(this->name() + ": rate must be in [0, 1)");
}

template <class T>
LayerSpec Dropout<T>::spec() const {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.rate = rate_;
  return s;
}

template <class T>
Tensor<T> Dropout<T>::train_forward(const Tensor<T>& x) {
  cached_mask_.assign(x.size(), T{1});
  Tensor<T> y = x;
  if (rate_ > 0.0) {
    Rng rng(mix_seed(seed_, calls_));
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    for (std::size_t i = 0; i < x.size(); ++i) {
      cached_mask_[i] = rng.uniform() < rate_ ? T{0} : keep_scale;
      y[i] *= cached_mask_[i];
    }
  }
  ++calls_;
  return y;
}

template <class T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_out) {
  this->require_cache(cached_mask_.size() == grad_out.size() && !cached_mask_.empty());
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= cached_mask_[i];
  return g;
}

// ---------------------------------------------------------------------------

template <class T>
Loss<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) {
    throw ShapeError("mse_loss: shape " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  double sum = 0.0;
  Tensor<T> grad(pred.shape());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += diff * diff;
    grad[i] = static_cast<T>(2.0 * diff / n);
  }
  return {static_cast<T>(sum / n), std::move(grad)};
}

#define FLAMESENTINEL_INSTANTIATE(T)                       \
  template class Conv<T>;                                  \
  template class BatchNorm<T>;                             \
  template class Relu<T>;                                  \
  template class Sigmoid<T>;                               \
  template class MaxPool<T>;                               \
  template class Upsample<T>;                              \
  template class Dropout<T>;                               \
  template Loss<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);

FLAMESENTINEL_INSTANTIATE(float)
FLAMESENTINEL_INSTANTIATE(double)

#undef FLAMESENTINEL_INSTANTIATE

}  // namespace flamesentinel::nn
