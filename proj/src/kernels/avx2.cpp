// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma
// -ffp-contract=off and only entered after a runtime CPU check.

#include <immintrin.h>

#include "flamesentinel/kernels/kernels.hpp"
#include "simd_conv.hpp"

namespace flamesentinel::kernels {
namespace {

constexpr std::size_t kLanes = 8;

struct Avx2 {
  using Vec = __m256;
  static constexpr std::size_t kLanes = 8;
  static constexpr std::size_t kAccumulators = 12;
  static Vec load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Vec v) { _mm256_storeu_ps(p, v); }
  static void store_partial(float* p, Vec v, std::size_t active) {
    alignas(32) int lanes[kLanes];
    for (std::size_t i = 0; i < kLanes; ++i) lanes[i] = i < active ? -1 : 0;
    _mm256_maskstore_ps(p, _mm256_load_si256(reinterpret_cast<const __m256i*>(lanes)), v);
  }
  static Vec broadcast(const float* p) { return _mm256_broadcast_ss(p); }
  static Vec fma(Vec a, Vec b, Vec c) { return _mm256_fmadd_ps(a, b, c); }
  static Vec add(Vec a, Vec b) { return _mm256_add_ps(a, b); }
  static Vec zero() { return _mm256_setzero_ps(); }
};

void adam_update_avx2(std::size_t n, float* param, const float* grad, float* m, float* v,
                      const AdamCoefficients& c) {
  const float one_minus_b1 = 1.0f - c.beta1;
  const float one_minus_b2 = 1.0f - c.beta2;
  const float inv_c1 = 1.0f / c.bias_correction1;
  const float inv_c2 = 1.0f / c.bias_correction2;
  const __m256 b1 = _mm256_set1_ps(c.beta1), b2 = _mm256_set1_ps(c.beta2);
  const __m256 omb1 = _mm256_set1_ps(one_minus_b1), omb2 = _mm256_set1_ps(one_minus_b2);
  const __m256 ic1 = _mm256_set1_ps(inv_c1), ic2 = _mm256_set1_ps(inv_c2);
  const __m256 lr = _mm256_set1_ps(c.learning_rate), eps = _mm256_set1_ps(c.epsilon);
  std::size_t i = 0;
  // Same operation order as the reference, without fused multiply-adds, so
  // results are bit-identical.
  for (; i + kLanes <= n; i += kLanes) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 mhat = _mm256_mul_ps(mi, ic1);
    const __m256 vhat = _mm256_mul_ps(vi, ic2);
    const __m256 step =
        _mm256_div_ps(_mm256_mul_ps(lr, mhat), _mm256_add_ps(_mm256_sqrt_ps(vhat), eps));
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  if (i < n) {
    adam_update_reference<float>(n - i, param + i, grad + i, m + i, v + i, c.learning_rate,
                                 c.beta1, c.beta2, c.epsilon, c.bias_correction1,
                                 c.bias_correction2);
  }
}

}  // namespace

const KernelSet* avx2_kernels() {
  static const KernelSet set{"avx2", simd::conv_forward<Avx2>,
                                 simd::conv_weight_grad<Avx2>, adam_update_avx2};
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &set : nullptr;
}

}  // namespace flamesentinel::kernels
