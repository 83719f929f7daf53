// NEON variants for AArch64, where Advanced SIMD is part of the base ISA.

#include <arm_neon.h>

#include "flamesentinel/kernels/kernels.hpp"
#include "simd_conv.hpp"

namespace flamesentinel::kernels {
namespace {

constexpr std::size_t kLanes = 4;

struct Neon {
  using Vec = float32x4_t;
  static constexpr std::size_t kLanes = 4;
  static constexpr std::size_t kAccumulators = 16;
  static Vec load(const float* p) { return vld1q_f32(p); }
  static void store(float* p, Vec v) { vst1q_f32(p, v); }
  static void store_partial(float* p, Vec v, std::size_t active) {
    float lanes[kLanes];
    vst1q_f32(lanes, v);
    for (std::size_t i = 0; i < active; ++i) p[i] = lanes[i];
  }
  static Vec broadcast(const float* p) { return vld1q_dup_f32(p); }
  static Vec fma(Vec a, Vec b, Vec c) { return vfmaq_f32(c, a, b); }
  static Vec add(Vec a, Vec b) { return vaddq_f32(a, b); }
  static Vec zero() { return vdupq_n_f32(0.0f); }
};

void adam_update_neon(std::size_t n, float* param, const float* grad, float* m, float* v,
                      const AdamCoefficients& c) {
  const float32x4_t b1 = vdupq_n_f32(c.beta1), b2 = vdupq_n_f32(c.beta2);
  const float32x4_t omb1 = vdupq_n_f32(1.0f - c.beta1), omb2 = vdupq_n_f32(1.0f - c.beta2);
  const float32x4_t ic1 = vdupq_n_f32(1.0f / c.bias_correction1);
  const float32x4_t ic2 = vdupq_n_f32(1.0f / c.bias_correction2);
  const float32x4_t lr = vdupq_n_f32(c.learning_rate), eps = vdupq_n_f32(c.epsilon);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float32x4_t g = vld1q_f32(grad + i);
    const float32x4_t mi = vaddq_f32(vmulq_f32(b1, vld1q_f32(m + i)), vmulq_f32(omb1, g));
    const float32x4_t vi = vaddq_f32(vmulq_f32(b2, vld1q_f32(v + i)), vmulq_f32(omb2, vmulq_f32(g, g)));
    vst1q_f32(m + i, mi);
    vst1q_f32(v + i, vi);
    const float32x4_t step = vdivq_f32(vmulq_f32(lr, vmulq_f32(mi, ic1)),
                                       vaddq_f32(vsqrtq_f32(vmulq_f32(vi, ic2)), eps));
    vst1q_f32(param + i, vsubq_f32(vld1q_f32(param + i), step));
  }
  if (i < n) {
    adam_update_reference<float>(n - i, param + i, grad + i, m + i, v + i, c.learning_rate,
                                 c.beta1, c.beta2, c.epsilon, c.bias_correction1,
                                 c.bias_correction2);
  }
}

}  // namespace

const KernelSet* neon_kernels() {
  static const KernelSet set{"neon", simd::conv_forward<Neon>,
                                 simd::conv_weight_grad<Neon>, adam_update_neon};
  return &set;
}

}  // namespace flamesentinel::kernels
