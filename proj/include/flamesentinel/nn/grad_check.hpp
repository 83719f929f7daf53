#pragma once

#include <cstdint>
#include <string>

#include "flamesentinel/nn/sequential.hpp"

namespace flamesentinel::nn {

struct GradCheckOptions {
  double step = 1e-5;
  /// Lower bound on the relative-error denominator max(|analytic|, |numeric|),
  /// so entries whose true gradient is ~0 are judged on absolute error.
  double denominator_floor = 1e-7;
  /// Additional floor as a fraction of the largest |numeric| entry checked.
  /// Entries the architecture pins near zero (a conv bias feeding batchnorm)
  /// carry only rounding noise in 32-bit; this judges them against the
  /// network's gradient scale instead of their own.
  double scale_floor = 0.0;
  /// 0 checks every entry; otherwise a seeded random subset per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t sample_seed = 0;
  std::uint64_t dropout_seed = 0;
  bool include_input = true;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_entry;
  std::size_t entries_checked = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares the analytic gradient of mse(net(input), target) with central
/// differences, over every parameter (and the input when enabled). The net
/// runs in train mode with dropout masks pinned to options.dropout_seed.
GradCheckReport grad_check(Sequential<double>& net, const Tensor<double>& input,
                           const Tensor<double>& target, double tolerance,
                           const GradCheckOptions& options = {});

/// Same comparison for the 32-bit production path: analytic gradients come
/// from `net`; central differences are taken on `reference`, a 64-bit stack of
/// identical structure that receives net's parameters first.
GradCheckReport grad_check_mixed(Sequential<float>& net, Sequential<double>& reference,
                                 const Tensor<double>& input, const Tensor<double>& target,
                                 double tolerance, const GradCheckOptions& options = {});

}  // namespace flamesentinel::nn
