#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "flamesentinel/nn/checkpoint.hpp"
#include "flamesentinel/nn/sequential.hpp"

namespace flamesentinel::models {

enum class Variant { csae3d, csae2d };

using flamesentinel::to_string;
std::string to_string(Variant v);
/// Accepts "csae3d"/"3d" and "csae2d"/"2d"; ConfigError otherwise.
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::csae3d;
  double width_scale = 1.0;
  double dropout = 0.25;
  std::uint64_t seed = 0;
};

/// Hidden channel counts {enc1, enc2, enc3, dec1, dec2, dec3} = round(width * {32,64,96,64,32,16}),
/// at least 1 each. The output conv always has one channel.
std::array<std::size_t, 6> channel_plan(double width_scale);

/// Closed-form trainable parameter count (conv weights + biases, BN gamma + beta).
std::size_t analytic_parameter_count(Variant variant, double width_scale);

/// Encoder: conv 1->c1, BN, ReLU, [3D only: conv c1->c2, BN, ReLU,] pool, dropout(3D),
/// conv ->c2/c3, BN, ReLU, pool, ... ; decoder mirrors with upsampling and a
/// sigmoid output. The 3D net keeps 3x3x3 kernels and 2x2x2 pools; the 2D net
/// uses (1,3,3) kernels and (1,2,2) pools over depth-1 activations.
template <class T>
nn::Sequential<T> build_csae3d(double width_scale, std::uint64_t seed, double dropout = 0.25);
template <class T>
nn::Sequential<T> build_csae2d(double width_scale, std::uint64_t seed, double dropout = 0.25);

/// Encoder-decoder over batches shaped [B, N, H, W, 1]. The 2D variant runs
/// each frame independently by folding N into the batch axis.
class CsaeModel {
 public:
  explicit CsaeModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  Variant variant() const noexcept { return config_.variant; }
  nn::Sequential<float>& net() noexcept { return net_; }
  const nn::Sequential<float>& net() const noexcept { return net_; }

  /// Throws ShapeError unless x is [B, N, H, W, 1] with extents the pools divide.
  void check_input(const Shape& shape) const;

  Tensor<float> forward(const Tensor<float>& x, nn::Mode mode);
  Tensor<float> infer(const Tensor<float>& x) const;
  Tensor<float> backward(const Tensor<float>& grad_out);

  std::size_t parameter_count();
  std::size_t encoder_conv_count() const;
  std::size_t decoder_conv_count() const;

  /// Parameters and batchnorm running statistics, in layer order.
  std::vector<nn::NamedTensor> state() const;
  /// Loads every tensor named by state() from ck; FormatError if one is
  /// missing or misshapen.
  void load_state(const nn::Checkpoint& ck);

  nlohmann::json header() const;
  static ModelConfig config_from_header(const nlohmann::json& header);

  /// Model-only checkpoint; `extra` is merged into the header.
  void save(const std::filesystem::path& manifest, const nlohmann::json& extra = nlohmann::json::object()) const;
  static CsaeModel load(const std::filesystem::path& manifest);
  static CsaeModel from_checkpoint(const nn::Checkpoint& ck);

 private:
  Tensor<float> fold(const Tensor<float>& x) const;
  Tensor<float> unfold(const Tensor<float>& y, const Shape& shape) const;

  ModelConfig config_;
  mutable nn::Sequential<float> net_;
  Shape last_shape_;
};

}  // namespace flamesentinel::models
