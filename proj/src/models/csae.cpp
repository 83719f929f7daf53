#include "flamesentinel/models/csae.hpp"

#include <cmath>

#include "flamesentinel/core/error.hpp"

namespace flamesentinel::models {
namespace {

constexpr std::array<double, 6> kBaseChannels{32, 64, 96, 64, 32, 16};
constexpr nn::Extent3 kKernel3{3, 3, 3};
constexpr nn::Extent3 kKernel2{1, 3, 3};
constexpr nn::Extent3 kPool3{2, 2, 2};
constexpr nn::Extent3 kPool2{1, 2, 2};

template <class T>
struct Builder {
  nn::Sequential<T> net;
  Rng rng;
  std::uint64_t seed;
  std::size_t dropouts = 0;

  void conv_bn_relu(const std::string& name, nn::Extent3 k, std::size_t cin, std::size_t cout) {
    conv(name + ".conv", k, cin, cout);
    net.template add<nn::BatchNorm<T>>(name + ".bn", cout);
    net.template add<nn::Relu<T>>(name + ".relu");
  }
  void conv(const std::string& name, nn::Extent3 k, std::size_t cin, std::size_t cout) {
    auto& c = net.template add<nn::Conv<T>>(name, k, cin, cout);
    c.initialize_uniform(rng);
    if (net.size() == 1) c.set_input_grad_enabled(false);
  }
  void dropout(const std::string& name, double rate) {
    net.template add<nn::Dropout<T>>(name, rate, mix_seed(seed, 1000 + dropouts++));
  }
};

}  // namespace

std::string to_string(Variant v) { return v == Variant::csae3d ? "csae3d" : "csae2d"; }

Variant parse_variant(std::string_view name) {
  if (name == "csae3d" || name == "3d") return Variant::csae3d;
  if (name == "csae2d" || name == "2d") return Variant::csae2d;
  throw ConfigError("unknown model variant '" + std::string(name) + "' (expected 3d or 2d)");
}

std::array<std::size_t, 6> channel_plan(double width_scale) {
  if (!(width_scale > 0.0) || !std::isfinite(width_scale)) {
    throw ConfigError("width_scale must be positive, got " + std::to_string(width_scale));
  }
  std::array<std::size_t, 6> out{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(kBaseChannels[i] * width_scale)));
  }
  return out;
}

std::size_t analytic_parameter_count(Variant variant, double width_scale) {
  const auto c = channel_plan(width_scale);
  const std::size_t taps = variant == Variant::csae3d ? 27 : 9;
  auto conv = [taps](std::size_t cin, std::size_t cout) { return cout * (cin * taps + 1); };
  // conv 1->c0, c0->c1, c1->c2, c2->c3, c3->c4, c4->c5, c5->1; BN on the first six.
  const std::size_t convs = conv(1, c[0]) + conv(c[0], c[1]) + conv(c[1], c[2]) + conv(c[2], c[3]) +
                            conv(c[3], c[4]) + conv(c[4], c[5]) + conv(c[5], 1);
  std::size_t bn = 0;
  for (std::size_t ch : c) bn += 2 * ch;
  return convs + bn;
}

template <class T>
nn::Sequential<T> build_csae3d(double width_scale, std::uint64_t seed, double dropout) {
  const auto c = channel_plan(width_scale);
  Builder<T> b{{}, Rng(seed), seed};
  b.conv_bn_relu("enc1", kKernel3, 1, c[0]);
  b.conv_bn_relu("enc2", kKernel3, c[0], c[1]);
  b.net.template add<nn::MaxPool<T>>("pool1", kPool3);
  b.dropout("drop1", dropout);
  b.conv_bn_relu("enc3", kKernel3, c[1], c[2]);
  b.net.template add<nn::MaxPool<T>>("pool2", kPool3);
  b.dropout("drop2", dropout);
  b.conv_bn_relu("dec1", kKernel3, c[2], c[3]);
  b.net.template add<nn::Upsample<T>>("up1", kPool3);
  b.conv_bn_relu("dec2", kKernel3, c[3], c[4]);
  b.net.template add<nn::Upsample<T>>("up2", kPool3);
  b.conv_bn_relu("dec3", kKernel3, c[4], c[5]);
  b.conv("out.conv", kKernel3, c[5], 1);
  b.net.template add<nn::Sigmoid<T>>("out.sigmoid");
  return std::move(b.net);
}

template <class T>
nn::Sequential<T> build_csae2d(double width_scale, std::uint64_t seed, double dropout) {
  const auto c = channel_plan(width_scale);
  Builder<T> b{{}, Rng(seed), seed};
  b.conv_bn_relu("enc1", kKernel2, 1, c[0]);
  b.net.template add<nn::MaxPool<T>>("pool1", kPool2);
  b.dropout("drop1", dropout);
  b.conv_bn_relu("enc2", kKernel2, c[0], c[1]);
  b.net.template add<nn::MaxPool<T>>("pool2", kPool2);
  b.dropout("drop2", dropout);
  b.conv_bn_relu("enc3", kKernel2, c[1], c[2]);
  b.conv_bn_relu("dec1", kKernel2, c[2], c[3]);
  b.net.template add<nn::Upsample<T>>("up1", kPool2);
  b.conv_bn_relu("dec2", kKernel2, c[3], c[4]);
  b.net.template add<nn::Upsample<T>>("up2", kPool2);
  b.conv_bn_relu("dec3", kKernel2, c[4], c[5]);
  b.conv("out.conv", kKernel2, c[5], 1);
  b.net.template add<nn::Sigmoid<T>>("out.sigmoid");
  return std::move(b.net);
}

template nn::Sequential<float> build_csae3d<float>(double, std::uint64_t, double);
template nn::Sequential<double> build_csae3d<double>(double, std::uint64_t, double);
template nn::Sequential<float> build_csae2d<float>(double, std::uint64_t, double);
template nn::Sequential<double> build_csae2d<double>(double, std::uint64_t, double);

CsaeModel::CsaeModel(ModelConfig config)
    : config_(config),
      net_(config.variant == Variant::csae3d
               ? build_csae3d<float>(config.width_scale, config.seed, config.dropout)
               : build_csae2d<float>(config.width_scale, config.seed, config.dropout)) {}

void CsaeModel::check_input(const Shape& shape) const {
  if (shape.size() != 5 || shape[4] != 1) {
    throw ShapeError("model input must be [B, N, H, W, 1], got " + to_string(shape));
  }
  const bool depth_pooled = config_.variant == Variant::csae3d;
  if ((depth_pooled && shape[1] % 4 != 0) || shape[2] % 4 != 0 || shape[3] % 4 != 0) {
    throw ShapeError("model input extents must be divisible by 4 along pooled axes, got " + to_string(shape));
  }
}

Tensor<float> CsaeModel::fold(const Tensor<float>& x) const {
  check_input(x.shape());
  if (config_.variant == Variant::csae3d) return x;
  const Shape& s = x.shape();
  Tensor<float> out = x;
  out.reshape({s[0] * s[1], 1, s[2], s[3], 1});
  return out;
}

Tensor<float> CsaeModel::unfold(const Tensor<float>& y, const Shape& shape) const {
  if (config_.variant == Variant::csae3d) return y;
  Tensor<float> out = y;
  out.reshape(shape);
  return out;
}

Tensor<float> CsaeModel::forward(const Tensor<float>& x, nn::Mode mode) {
  last_shape_ = x.shape();
  return unfold(net_.forward(fold(x), mode), x.shape());
}

Tensor<float> CsaeModel::infer(const Tensor<float>& x) const { return unfold(net_.infer(fold(x)), x.shape()); }

Tensor<float> CsaeModel::backward(const Tensor<float>& grad_out) {
  if (grad_out.shape() != last_shape_) throw ShapeError("backward: gradient does not match last forward");
  Tensor<float> g = grad_out;
  if (config_.variant == Variant::csae2d) {
    g.reshape({last_shape_[0] * last_shape_[1], 1, last_shape_[2], last_shape_[3], 1});
  }
  return net_.backward(g);
}

std::size_t CsaeModel::parameter_count() { return net_.parameter_count(); }

std::size_t CsaeModel::encoder_conv_count() const { return 3; }

std::size_t CsaeModel::decoder_conv_count() const { return 4; }

std::vector<nn::NamedTensor> CsaeModel::state() const {
  std::vector<nn::NamedTensor> out;
  for (auto* p : net_.parameters()) out.push_back({p->name, p->value});
  for (const auto& b : net_.buffers()) out.push_back({b.name, *b.tensor});
  return out;
}

void CsaeModel::load_state(const nn::Checkpoint& ck) {
  auto load = [&ck](const std::string& name, Tensor<float>& dst) {
    const Tensor<float>* src = ck.find(name);
    if (src == nullptr) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (src->shape() != dst.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + to_string(src->shape()) + ", model expects " +
                        to_string(dst.shape()));
    }
    dst = *src;
  };
  for (auto* p : net_.parameters()) load(p->name, p->value);
  for (auto& b : net_.buffers()) load(b.name, *b.tensor);
}

nlohmann::json CsaeModel::header() const {
  return {{"model",
           {{"variant", to_string(config_.variant)},
            {"width_scale", config_.width_scale},
            {"dropout", config_.dropout},
            {"seed", config_.seed}}}};
}

ModelConfig CsaeModel::config_from_header(const nlohmann::json& header) {
  try {
    const auto& m = header.at("model");
    ModelConfig c;
    c.variant = parse_variant(m.at("variant").get<std::string>());
    c.width_scale = m.at("width_scale").get<double>();
    c.dropout = m.at("dropout").get<double>();
    c.seed = m.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header lacks a model description: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

void CsaeModel::save(const std::filesystem::path& manifest, const nlohmann::json& extra) const {
  nn::Checkpoint ck;
  ck.header = header();
  ck.header.update(extra);
  ck.tensors = state();
  nn::save_checkpoint(manifest, ck);
}

CsaeModel CsaeModel::from_checkpoint(const nn::Checkpoint& ck) {
  CsaeModel model(config_from_header(ck.header));
  model.load_state(ck);
  return model;
}

CsaeModel CsaeModel::load(const std::filesystem::path& manifest) {
  return from_checkpoint(nn::load_checkpoint(manifest));
}

}  // namespace flamesentinel::models
