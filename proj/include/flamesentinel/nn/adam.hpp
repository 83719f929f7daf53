#pragma once

#include <cstdint>
#include <vector>

#include "flamesentinel/nn/layers.hpp"

namespace flamesentinel::nn {

/// beta1 doubles as the momentum term.
struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.975;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are created lazily on the first step
/// and must keep matching the parameter list passed to later steps.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Param<T>*>& params);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step_count() const noexcept { return steps_; }

  std::vector<Tensor<T>>& first_moments() noexcept { return m_; }
  std::vector<Tensor<T>>& second_moments() noexcept { return v_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

  /// Restores state saved from an identically shaped optimizer.
  void restore(std::uint64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v);

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace flamesentinel::nn
