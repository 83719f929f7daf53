#include "flamesentinel/kernels/kernels.hpp"

namespace flamesentinel::kernels {
namespace {

void conv_forward_scalar(const ConvGeometry& g, const float* x, const float* w, const float* b,
                         float* y) {
  conv_forward_reference<float>(g, x, w, b, y);
}

void conv_weight_grad_scalar(const ConvGeometry& g, const float* x, const float* gy, float* gw,
                             float* gb) {
  conv_weight_grad_reference<float>(g, x, gy, gw, gb);
}

void adam_update_scalar(std::size_t n, float* param, const float* grad, float* m, float* v,
                        const AdamCoefficients& c) {
  adam_update_reference<float>(n, param, grad, m, v, c.learning_rate, c.beta1, c.beta2, c.epsilon,
                               c.bias_correction1, c.bias_correction2);
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet set{"scalar", conv_forward_scalar, conv_weight_grad_scalar,
                             adam_update_scalar};
  return set;
}

}  // namespace flamesentinel::kernels
