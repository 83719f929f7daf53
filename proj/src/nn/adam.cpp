#include "flamesentinel/nn/adam.hpp"

#include <cmath>
#include <type_traits>

#include "flamesentinel/kernels/kernels.hpp"

namespace flamesentinel::nn {

template <class T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    if (!p.value.same_shape(m_[i]) || !p.grad.same_shape(p.value)) {
      throw ShapeError("adam: shape mismatch for " + p.name);
    }
    if constexpr (std::is_same_v<T, float>) {
      const kernels::AdamCoefficients coeff{
          static_cast<float>(config_.learning_rate), static_cast<float>(config_.beta1),
          static_cast<float>(config_.beta2), static_cast<float>(config_.epsilon),
          static_cast<float>(c1), static_cast<float>(c2)};
      kernels::active_kernels().adam_update(p.value.size(), p.value.data(), p.grad.data(),
                                            m_[i].data(), v_[i].data(), coeff);
    } else {
      kernels::adam_update_reference<T>(p.value.size(), p.value.data(), p.grad.data(), m_[i].data(),
                                        v_[i].data(), config_.learning_rate, config_.beta1,
                                        config_.beta2, config_.epsilon, c1, c2);
    }
  }
}

template <class T>
void Adam<T>::restore(std::uint64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
  if (m.size() != v.size()) throw ShapeError("adam: moment lists differ in length");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i].same_shape(v[i])) throw ShapeError("adam: moment shapes differ");
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace flamesentinel::nn
