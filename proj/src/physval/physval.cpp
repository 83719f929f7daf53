#include "flamesentinel/physval/physval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flamesentinel/core/csv.hpp"
#include "flamesentinel/core/error.hpp"
#include "flamesentinel/core/parallel.hpp"

namespace flamesentinel::physval {
namespace {

struct Image {
  std::size_t h, w;
  std::vector<double> v;

  double at(long y, long x) const {  // replicated border
    const auto yy = static_cast<std::size_t>(std::clamp(y, 0L, static_cast<long>(h) - 1));
    const auto xx = static_cast<std::size_t>(std::clamp(x, 0L, static_cast<long>(w) - 1));
    return v[yy * w + xx];
  }
};

Image gaussian_blur(const Image& in, double sigma) {
  if (sigma <= 0.0) return in;
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (long i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& x : k) x /= sum;
  Image tmp{in.h, in.w, std::vector<double>(in.v.size())};
  for (long y = 0; y < static_cast<long>(in.h); ++y)
    for (long x = 0; x < static_cast<long>(in.w); ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * in.at(y, x + i);
      tmp.v[static_cast<std::size_t>(y) * in.w + static_cast<std::size_t>(x)] = s;
    }
  Image out{in.h, in.w, std::vector<double>(in.v.size())};
  for (long y = 0; y < static_cast<long>(in.h); ++y)
    for (long x = 0; x < static_cast<long>(in.w); ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp.at(y + i, x);
      out.v[static_cast<std::size_t>(y) * in.w + static_cast<std::size_t>(x)] = s;
    }
  return out;
}

void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("conditioning fraction must lie in (0,1)");
}

}  // namespace

void CannySpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("canny sigma must be non-negative");
  if (!(low > 0.0 && low < high && high <= 1.0)) throw ConfigError("canny thresholds need 0 < low < high <= 1");
}

std::size_t EdgeMap::count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }

EdgeMap canny(std::span<const float> frame, std::size_t height, std::size_t width, const CannySpec& spec) {
  spec.validate();
  if (height == 0 || width == 0 || frame.size() != height * width) throw ShapeError("canny: frame size does not match extents");
  const Image blurred = gaussian_blur(Image{height, width, std::vector<double>(frame.begin(), frame.end())}, spec.sigma);

  const long H = static_cast<long>(height), W = static_cast<long>(width);
  std::vector<double> mag(height * width), gx(height * width), gy(height * width);
  double peak = 0.0;
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      const auto& b = blurred;
      const double dx = (b.at(y - 1, x + 1) + 2.0 * b.at(y, x + 1) + b.at(y + 1, x + 1)) -
                        (b.at(y - 1, x - 1) + 2.0 * b.at(y, x - 1) + b.at(y + 1, x - 1));
      const double dy = (b.at(y + 1, x - 1) + 2.0 * b.at(y + 1, x) + b.at(y + 1, x + 1)) -
                        (b.at(y - 1, x - 1) + 2.0 * b.at(y - 1, x) + b.at(y - 1, x + 1));
      const std::size_t i = static_cast<std::size_t>(y * W + x);
      gx[i] = dx;
      gy[i] = dy;
      mag[i] = std::hypot(dx, dy);
      peak = std::max(peak, mag[i]);
    }

  EdgeMap edges{height, width, std::vector<std::uint8_t>(height * width, 0)};
  if (!(peak > 0.0)) return edges;

  // Non-maximum suppression. The first neighbour must be strictly smaller so
  // a plateau two pixels wide keeps one of them.
  auto mag_at = [&](long y, long x) {
    return (y < 0 || y >= H || x < 0 || x >= W) ? 0.0 : mag[static_cast<std::size_t>(y * W + x)];
  };
  std::vector<double> thin(height * width, 0.0);
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y * W + x);
      if (mag[i] == 0.0) continue;
      double angle = std::atan2(gy[i], gx[i]) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      long oy, ox;  // step along the gradient (y grows downward)
      if (angle < 22.5 || angle >= 157.5) {
        oy = 0;
        ox = 1;
      } else if (angle < 67.5) {
        oy = 1;
        ox = 1;
      } else if (angle < 112.5) {
        oy = 1;
        ox = 0;
      } else {
        oy = 1;
        ox = -1;
      }
      if (mag[i] > mag_at(y - oy, x - ox) && mag[i] >= mag_at(y + oy, x + ox)) thin[i] = mag[i];
    }

  const double strong = spec.high * peak, weak = spec.low * peak;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < thin.size(); ++i) {
    if (thin[i] >= strong && thin[i] > 0.0) {
      edges.mask[i] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const long y = static_cast<long>(i) / W, x = static_cast<long>(i) % W;
    for (long dy = -1; dy <= 1; ++dy)
      for (long dx = -1; dx <= 1; ++dx) {
        const long ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
        const std::size_t j = static_cast<std::size_t>(ny * W + nx);
        if (!edges.mask[j] && thin[j] >= weak && thin[j] > 0.0) {
          edges.mask[j] = 1;
          stack.push_back(j);
        }
      }
  }
  return edges;
}

double peak_pressure(std::span<const double> p) {
  if (p.empty()) throw InputDomainError("pressure series is empty");
  for (double v : p) {
    if (!std::isfinite(v)) throw InputDomainError("pressure series contains a non-finite value");
  }
  return *std::max_element(p.begin(), p.end());
}

std::vector<std::size_t> conditioned_instants(std::span<const double> p, double fraction) {
  check_fraction(fraction);
  const double pmax = peak_pressure(p);
  std::vector<std::size_t> out;
  if (!(pmax > 0.0)) return out;
  const double cut = fraction * pmax;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t] > cut) out.push_back(t);
  }
  return out;
}

std::vector<double> normalized_conditioned_pressure(std::span<const double> p, double fraction) {
  check_fraction(fraction);
  const double pmax = peak_pressure(p);
  std::vector<double> out(p.size(), 0.0);
  if (!(pmax > 0.0)) return out;
  const double cut = fraction * pmax;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t] > cut) out[t] = p[t] / pmax;
  }
  return out;
}

std::vector<std::size_t> window_instants(std::span<const double> p, std::size_t first, std::size_t count,
                                         double fraction) {
  if (count == 0 || first + count > p.size()) throw InputDomainError("conditioning window lies outside the pressure series");
  auto local = conditioned_instants(p.subspan(first, count), fraction);
  for (auto& t : local) t += first;
  return local;
}

EdgeEnsemble ensemble_edges(const dataio::FrameSequence& seq, std::span<const std::size_t> instants,
                            const CannySpec& spec) {
  spec.validate();
  EdgeEnsemble e;
  e.instants.assign(instants.begin(), instants.end());
  e.union_map = {seq.height, seq.width, std::vector<std::uint8_t>(seq.frame_size(), 0)};
  for (std::size_t t : instants) {
    if (t >= seq.count) throw InputDomainError("conditioned instant " + std::to_string(t) + " lies outside the video");
  }
  e.members.resize(instants.size());
  parallel_for(instants.size(), [&](std::size_t i) { e.members[i] = canny(seq.frame(instants[i]), seq.height, seq.width, spec); });
  for (const auto& m : e.members) {
    for (std::size_t i = 0; i < m.mask.size(); ++i) e.union_map.mask[i] |= m.mask[i];
  }
  return e;
}

double thinness(const EdgeEnsemble& ensemble) {
  if (ensemble.empty()) throw InputDomainError("thinness of an empty ensemble");
  double total = 0.0;
  for (const auto& m : ensemble.members) total += static_cast<double>(m.count());
  if (total == 0.0) throw InputDomainError("thinness needs at least one edge pixel");
  return static_cast<double>(ensemble.union_map.count()) / (total / static_cast<double>(ensemble.count()));
}

dataio::Graymap to_graymap(const EdgeMap& edges) { return {edges.height, edges.width, 1, edges.mask}; }

void write_conditioned_pressure_csv(std::span<const double> normalized, double fps, const std::filesystem::path& path) {
  if (!(fps > 0.0)) throw InputDomainError("fps must be positive");
  csv::Writer w(path, {"time_s", "normalized_value"});
  for (std::size_t t = 0; t < normalized.size(); ++t) w.row({static_cast<double>(t) / fps, normalized[t]});
  w.close();
}

}  // namespace flamesentinel::physval
