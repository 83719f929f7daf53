#pragma once

// Arithmetic inner loops of the network. Every kernel has a scalar reference
// (templated so the 64-bit gradient-check path can use it) and, for float,
// optional SIMD variants picked at runtime by active_kernels().

#include <cmath>
#include <cstddef>

namespace flamesentinel::kernels {

/// "Same"-padded, stride-1 convolution over channels-last activations.
/// x: [batch, depth, height, width, in_channels]
/// w: [kd, kh, kw, in_channels, out_channels]
/// y: [batch, depth, height, width, out_channels]
/// Kernel extents are odd; the zero padding on each side is extent / 2.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t depth = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kd = 3;
  std::size_t kh = 3;
  std::size_t kw = 3;

  std::size_t voxels() const noexcept { return depth * height * width; }
  std::size_t taps() const noexcept { return kd * kh * kw; }
  std::size_t weight_count() const noexcept { return taps() * in_channels * out_channels; }
};

/// Scalars for one Adam step; bias corrections are 1 - beta^t.
struct AdamCoefficients {
  float learning_rate;
  float beta1;
  float beta2;
  float epsilon;
  float bias_correction1;
  float bias_correction2;
};

/// y = conv(x, w) + b. b may be null.
using ConvForwardFn = void (*)(const ConvGeometry&, const float* x, const float* w, const float* b,
                               float* y);
/// gw += dL/dw, gb += dL/db (gb may be null) for one batch of x and dL/dy.
using ConvWeightGradFn = void (*)(const ConvGeometry&, const float* x, const float* gy, float* gw,
                                  float* gb);
using AdamUpdateFn = void (*)(std::size_t n, float* param, const float* grad, float* m, float* v,
                              const AdamCoefficients&);

struct KernelSet {
  const char* name;
  ConvForwardFn conv_forward;
  ConvWeightGradFn conv_weight_grad;
  AdamUpdateFn adam_update;
};

const KernelSet& scalar_kernels();

/// Null unless the variant was compiled in and the running CPU supports it.
const KernelSet* avx2_kernels();
const KernelSet* neon_kernels();

/// Best supported set. FLAMESENTINEL_KERNELS=scalar forces the reference path.
const KernelSet& active_kernels();

// ---------------------------------------------------------------------------
// Reference implementations.

template <class T>
void conv_forward_reference(const ConvGeometry& g, const T* x, const T* w, const T* b, T* y) {
  const long D = static_cast<long>(g.depth), H = static_cast<long>(g.height),
             W = static_cast<long>(g.width);
  const long pd = static_cast<long>(g.kd / 2), ph = static_cast<long>(g.kh / 2),
             pw = static_cast<long>(g.kw / 2);
  const std::size_t cin = g.in_channels, cout = g.out_channels;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (long d = 0; d < D; ++d) {
      for (long h = 0; h < H; ++h) {
        for (long wi = 0; wi < W; ++wi) {
          T* out = y + ((((static_cast<long>(n) * D + d) * H + h) * W + wi)) * cout;
          for (std::size_t co = 0; co < cout; ++co) out[co] = b ? b[co] : T{0};
          for (long a = 0; a < static_cast<long>(g.kd); ++a) {
            const long sd = d + a - pd;
            if (sd < 0 || sd >= D) continue;
            for (long bb = 0; bb < static_cast<long>(g.kh); ++bb) {
              const long sh = h + bb - ph;
              if (sh < 0 || sh >= H) continue;
              for (long c = 0; c < static_cast<long>(g.kw); ++c) {
                const long sw = wi + c - pw;
                if (sw < 0 || sw >= W) continue;
                const T* in = x + (((static_cast<long>(n) * D + sd) * H + sh) * W + sw) * cin;
                const T* wk = w + ((a * static_cast<long>(g.kh) + bb) * static_cast<long>(g.kw) + c) *
                                      static_cast<long>(cin * cout);
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  const T xv = in[ci];
                  const T* wrow = wk + ci * cout;
                  for (std::size_t co = 0; co < cout; ++co) out[co] += xv * wrow[co];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv_weight_grad_reference(const ConvGeometry& g, const T* x, const T* gy, T* gw, T* gb) {
  const long D = static_cast<long>(g.depth), H = static_cast<long>(g.height),
             W = static_cast<long>(g.width);
  const long pd = static_cast<long>(g.kd / 2), ph = static_cast<long>(g.kh / 2),
             pw = static_cast<long>(g.kw / 2);
  const std::size_t cin = g.in_channels, cout = g.out_channels;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (long d = 0; d < D; ++d) {
      for (long h = 0; h < H; ++h) {
        for (long wi = 0; wi < W; ++wi) {
          const T* grad = gy + ((((static_cast<long>(n) * D + d) * H + h) * W + wi)) * cout;
          if (gb) {
            for (std::size_t co = 0; co < cout; ++co) gb[co] += grad[co];
          }
          for (long a = 0; a < static_cast<long>(g.kd); ++a) {
            const long sd = d + a - pd;
            if (sd < 0 || sd >= D) continue;
            for (long bb = 0; bb < static_cast<long>(g.kh); ++bb) {
              const long sh = h + bb - ph;
              if (sh < 0 || sh >= H) continue;
              for (long c = 0; c < static_cast<long>(g.kw); ++c) {
                const long sw = wi + c - pw;
                if (sw < 0 || sw >= W) continue;
                const T* in = x + (((static_cast<long>(n) * D + sd) * H + sh) * W + sw) * cin;
                T* gk = gw + ((a * static_cast<long>(g.kh) + bb) * static_cast<long>(g.kw) + c) *
                                 static_cast<long>(cin * cout);
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  const T xv = in[ci];
                  T* grow = gk + ci * cout;
                  for (std::size_t co = 0; co < cout; ++co) grow[co] += xv * grad[co];
                }
              }
            }
          }
        }
      }
    }
  }
}

/// Kernel for the input gradient: spatially flipped, in/out channels swapped.
/// Convolving dL/dy with it yields dL/dx.
template <class T>
void flip_kernel_for_input_grad(const ConvGeometry& g, const T* w, T* flipped) {
  const std::size_t taps = g.taps(), cin = g.in_channels, cout = g.out_channels;
  for (std::size_t t = 0; t < taps; ++t) {
    const std::size_t src = taps - 1 - t;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t co = 0; co < cout; ++co) {
        flipped[(t * cout + co) * cin + ci] = w[(src * cin + ci) * cout + co];
      }
    }
  }
}

template <class T>
void adam_update_reference(std::size_t n, T* param, const T* grad, T* m, T* v, T learning_rate,
                           T beta1, T beta2, T epsilon, T bias_correction1, T bias_correction2) {
  const T one_minus_b1 = T{1} - beta1;
  const T one_minus_b2 = T{1} - beta2;
  const T inv_c1 = T{1} / bias_correction1;
  const T inv_c2 = T{1} / bias_correction2;
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + one_minus_b1 * g;
    v[i] = beta2 * v[i] + one_minus_b2 * (g * g);
    const T mhat = m[i] * inv_c1;
    const T vhat = v[i] * inv_c2;
    param[i] = param[i] - learning_rate * mhat / (std::sqrt(vhat) + epsilon);
  }
}

}  // namespace flamesentinel::kernels
