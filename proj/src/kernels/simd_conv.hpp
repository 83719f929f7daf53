#pragma once

// Register-blocked convolution loops shared by the SIMD variants. `Isa`
// supplies the vector type and a handful of primitives; each variant's
// translation unit instantiates these with its own target flags.
//
// Forward: outputs are blocked over WB neighbouring width positions times NV
// vectors of output channels, so one weight load feeds WB multiply-adds and
// WB * NV independent accumulator chains hide the FMA latency. The input is
// zero-padded along width so every position sees the full width window.
//
// Weight gradient: per input row the sum over width positions is blocked over
// the three width taps times CB input channels times NV output vectors.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "flamesentinel/kernels/kernels.hpp"

namespace flamesentinel::kernels::simd {

struct TapRange {
  long lo;
  long hi;
};

inline TapRange valid_taps(long pos, long extent, long kernel) {
  const long pad = kernel / 2;
  return {std::max(0L, pad - pos), std::min(kernel, extent + pad - pos)};
}

inline std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

constexpr std::size_t kMaxVectors = 4;

// Accumulator budget per block, leaving room for weights and broadcasts.
template <class Isa, std::size_t NV>
constexpr std::size_t position_block() {
  std::size_t wb = 1;
  while (wb * 2 * NV <= Isa::kAccumulators) wb *= 2;
  return wb;
}

struct ForwardArgs {
  const float* xp;  // input padded along width: [N][D][H][W + 2 pw][cin]
  const float* wp;  // [taps][cin][coutp]
  const float* bp;  // [coutp]
  float* y;
  std::size_t cin, cout, coutp;
  long D, H, W, Wp, kh, kw, pd, ph;
};

template <class Isa, std::size_t NV>
inline void store_outputs(const ForwardArgs& f, float* out, std::size_t co0,
                          const typename Isa::Vec* acc) {
#pragma GCC unroll 16
  for (std::size_t j = 0; j < NV; ++j) {
    const std::size_t ch = co0 + j * Isa::kLanes;
    if (ch + Isa::kLanes <= f.cout) {
      Isa::store(out + ch, acc[j]);
    } else {
      Isa::store_partial(out + ch, acc[j], f.cout - ch);
    }
  }
}

// WB consecutive output positions starting at wi.
template <class Isa, std::size_t NV, std::size_t WB>
inline void forward_run(const ForwardArgs& f, std::size_t co0, long n, long d, long h, long wi,
                        TapRange ra, TapRange rb) {
  using V = typename Isa::Vec;
  V acc[WB][NV];
#pragma GCC unroll 16
  for (std::size_t k = 0; k < WB; ++k) {
#pragma GCC unroll 16
    for (std::size_t j = 0; j < NV; ++j) acc[k][j] = Isa::load(f.bp + co0 + j * Isa::kLanes);
  }
  const long cin = static_cast<long>(f.cin), coutp = static_cast<long>(f.coutp);
  for (long a = ra.lo; a < ra.hi; ++a) {
    const long sd = d + a - f.pd;
    for (long b = rb.lo; b < rb.hi; ++b) {
      const long sh = h + b - f.ph;
      const float* xrow = f.xp + ((n * f.D + sd) * f.H + sh) * f.Wp * cin;
      for (long c = 0; c < f.kw; ++c) {
        const float* in = xrow + (wi + c) * cin;
        const float* wk = f.wp + ((a * f.kh + b) * f.kw + c) * cin * coutp + static_cast<long>(co0);
        for (long ci = 0; ci < cin; ++ci) {
          V wv[NV];
#pragma GCC unroll 16
          for (std::size_t j = 0; j < NV; ++j) wv[j] = Isa::load(wk + ci * coutp + j * Isa::kLanes);
#pragma GCC unroll 16
          for (std::size_t k = 0; k < WB; ++k) {
            const V xv = Isa::broadcast(in + static_cast<long>(k) * cin + ci);
#pragma GCC unroll 16
            for (std::size_t j = 0; j < NV; ++j) acc[k][j] = Isa::fma(xv, wv[j], acc[k][j]);
          }
        }
      }
    }
  }
  float* out = f.y + (((n * f.D + d) * f.H + h) * f.W + wi) * static_cast<long>(f.cout);
#pragma GCC unroll 16
  for (std::size_t k = 0; k < WB; ++k) store_outputs<Isa, NV>(f, out + k * f.cout, co0, acc[k]);
}

// Positions [wi, W) in blocks of WB, then halving blocks for the tail.
template <class Isa, std::size_t NV, std::size_t WB>
void forward_span(const ForwardArgs& f, std::size_t co0, long n, long d, long h, long wi,
                  TapRange ra, TapRange rb) {
  for (; wi + static_cast<long>(WB) <= f.W; wi += static_cast<long>(WB)) {
    forward_run<Isa, NV, WB>(f, co0, n, d, h, wi, ra, rb);
  }
  if constexpr (WB > 1) forward_span<Isa, NV, WB / 2>(f, co0, n, d, h, wi, ra, rb);
}

template <class Isa>
void conv_forward(const ConvGeometry& g, const float* x, const float* w, const float* b, float* y) {
  const std::size_t cin = g.in_channels, cout = g.out_channels;
  const std::size_t coutp = round_up(cout, Isa::kLanes);
  const std::size_t nvec = coutp / Isa::kLanes;
  std::vector<float> wp(g.taps() * cin * coutp, 0.0f);
  std::vector<float> bp(coutp, 0.0f);
  for (std::size_t r = 0; r < g.taps() * cin; ++r) {
    std::copy_n(w + r * cout, cout, wp.begin() + static_cast<long>(r * coutp));
  }
  if (b) std::copy_n(b, cout, bp.begin());

  // Zero columns on both sides of every row make all width taps valid.
  const std::size_t pw = g.kw / 2;
  const std::size_t row_in = g.width * cin, row_pad = (g.width + 2 * pw) * cin;
  const std::size_t rows = g.batch * g.depth * g.height;
  std::vector<float> xp(rows * row_pad, 0.0f);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x + r * row_in, row_in, xp.begin() + static_cast<long>(r * row_pad + pw * cin));
  }

  const ForwardArgs f{xp.data(),
                      wp.data(),
                      bp.data(),
                      y,
                      cin,
                      cout,
                      coutp,
                      static_cast<long>(g.depth),
                      static_cast<long>(g.height),
                      static_cast<long>(g.width),
                      static_cast<long>(g.width + 2 * pw),
                      static_cast<long>(g.kh),
                      static_cast<long>(g.kw),
                      static_cast<long>(g.kd / 2),
                      static_cast<long>(g.kh / 2)};
  for (long n = 0; n < static_cast<long>(g.batch); ++n) {
    for (long d = 0; d < f.D; ++d) {
      const TapRange ra = valid_taps(d, f.D, static_cast<long>(g.kd));
      for (long h = 0; h < f.H; ++h) {
        const TapRange rb = valid_taps(h, f.H, f.kh);
        for (std::size_t v0 = 0; v0 < nvec; v0 += kMaxVectors) {
          const std::size_t co0 = v0 * Isa::kLanes;
          switch (std::min(kMaxVectors, nvec - v0)) {
            case 1: forward_span<Isa, 1, position_block<Isa, 1>()>(f, co0, n, d, h, 0, ra, rb); break;
            case 2: forward_span<Isa, 2, position_block<Isa, 2>()>(f, co0, n, d, h, 0, ra, rb); break;
            case 3: forward_span<Isa, 3, position_block<Isa, 3>()>(f, co0, n, d, h, 0, ra, rb); break;
            default: forward_span<Isa, 4, position_block<Isa, 4>()>(f, co0, n, d, h, 0, ra, rb); break;
          }
        }
      }
    }
  }
}

struct WeightGradArgs {
  const float* xrow;      // padded input row: [W + 2 pw][cin]
  const float* grad_row;  // [W][coutp]
  float* gk;              // accumulators for taps (a, b, c0 ..): [kw][cin][coutp]
  std::size_t cin, coutp;
  long W;
};

// gk[c0 + t][ci0 + i][co0 ..] += sum over w of xrow[w + c0 + t][ci0 + i] * grad_row[w][co0 ..]
// for t < KC, i < CB.
template <class Isa, std::size_t NV, std::size_t CB, std::size_t KC>
inline void weight_grad_run(const WeightGradArgs& a, long c0, std::size_t ci0, std::size_t co0) {
  using V = typename Isa::Vec;
  V acc[KC][CB][NV];
#pragma GCC unroll 16
  for (std::size_t t = 0; t < KC; ++t) {
#pragma GCC unroll 16
    for (std::size_t i = 0; i < CB; ++i) {
#pragma GCC unroll 16
      for (std::size_t j = 0; j < NV; ++j) acc[t][i][j] = Isa::zero();
    }
  }
  const long cin = static_cast<long>(a.cin);
  for (long wi = 0; wi < a.W; ++wi) {
    const float* gr = a.grad_row + wi * static_cast<long>(a.coutp) + static_cast<long>(co0);
    V gv[NV];
#pragma GCC unroll 16
    for (std::size_t j = 0; j < NV; ++j) gv[j] = Isa::load(gr + j * Isa::kLanes);
    const float* xp = a.xrow + (wi + c0) * cin + static_cast<long>(ci0);
#pragma GCC unroll 16
    for (std::size_t t = 0; t < KC; ++t) {
#pragma GCC unroll 16
      for (std::size_t i = 0; i < CB; ++i) {
        const V xv = Isa::broadcast(xp + static_cast<long>(t) * cin + static_cast<long>(i));
#pragma GCC unroll 16
        for (std::size_t j = 0; j < NV; ++j) acc[t][i][j] = Isa::fma(xv, gv[j], acc[t][i][j]);
      }
    }
  }
#pragma GCC unroll 16
  for (std::size_t t = 0; t < KC; ++t) {
#pragma GCC unroll 16
    for (std::size_t i = 0; i < CB; ++i) {
#pragma GCC unroll 16
      for (std::size_t j = 0; j < NV; ++j) {
        float* dst = a.gk + ((static_cast<std::size_t>(c0) + t) * a.cin + ci0 + i) * a.coutp + co0 +
                     j * Isa::kLanes;
        Isa::store(dst, Isa::add(Isa::load(dst), acc[t][i][j]));
      }
    }
  }
}

// Input channels [ci, cin) in blocks of CB, then halving blocks for the tail.
template <class Isa, std::size_t NV, std::size_t CB, std::size_t KC>
void weight_grad_span(const WeightGradArgs& a, long c0, std::size_t ci, std::size_t co0) {
  for (; ci + CB <= a.cin; ci += CB) weight_grad_run<Isa, NV, CB, KC>(a, c0, ci, co0);
  if constexpr (CB > 1) weight_grad_span<Isa, NV, CB / 2, KC>(a, c0, ci, co0);
}

template <class Isa, std::size_t NV, std::size_t KC>
constexpr std::size_t channel_block() {
  std::size_t cb = 1;
  while (cb * 2 * KC * NV <= Isa::kAccumulators) cb *= 2;
  return cb;
}

// Three-wide width kernels are handled in one pass; other widths per tap.
template <class Isa, std::size_t NV>
void weight_grad_taps(const WeightGradArgs& a, long kw, std::size_t co0) {
  if constexpr (3 * NV <= Isa::kAccumulators) {
    if (kw == 3) {
      weight_grad_span<Isa, NV, channel_block<Isa, NV, 3>(), 3>(a, 0, 0, co0);
      return;
    }
  }
  for (long c = 0; c < kw; ++c) {
    weight_grad_span<Isa, NV, channel_block<Isa, NV, 1>(), 1>(a, c, 0, co0);
  }
}

template <class Isa>
void conv_weight_grad(const ConvGeometry& g, const float* x, const float* gy, float* gw,
                      float* gb) {
  const std::size_t cin = g.in_channels, cout = g.out_channels;
  const std::size_t coutp = round_up(cout, Isa::kLanes);
  const std::size_t nvec = coutp / Isa::kLanes;
  const long D = static_cast<long>(g.depth), H = static_cast<long>(g.height),
             W = static_cast<long>(g.width);
  const long kh = static_cast<long>(g.kh), kw = static_cast<long>(g.kw);
  const long pd = static_cast<long>(g.kd / 2), ph = kh / 2;

  const std::size_t pw = g.kw / 2;
  const std::size_t row_in = g.width * cin, row_pad = (g.width + 2 * pw) * cin;
  const std::size_t rows = g.batch * g.depth * g.height;
  std::vector<float> xp(rows * row_pad, 0.0f);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x + r * row_in, row_in, xp.begin() + static_cast<long>(r * row_pad + pw * cin));
  }

  std::vector<float> gwp(g.taps() * cin * coutp, 0.0f);
  std::vector<float> gbp(coutp, 0.0f);
  std::vector<float> row(static_cast<std::size_t>(W) * coutp, 0.0f);

  for (long n = 0; n < static_cast<long>(g.batch); ++n) {
    for (long d = 0; d < D; ++d) {
      const TapRange ra = valid_taps(d, D, static_cast<long>(g.kd));
      for (long h = 0; h < H; ++h) {
        const TapRange rb = valid_taps(h, H, kh);
        const float* src = gy + ((n * D + d) * H + h) * W * static_cast<long>(cout);
        for (long wi = 0; wi < W; ++wi) {
          std::copy_n(src + wi * static_cast<long>(cout), cout,
                      row.begin() + wi * static_cast<long>(coutp));
          for (std::size_t j = 0; j < nvec; ++j) {
            float* dst = gbp.data() + j * Isa::kLanes;
            Isa::store(dst, Isa::add(Isa::load(dst),
                                     Isa::load(row.data() + wi * static_cast<long>(coutp) +
                                               j * Isa::kLanes)));
          }
        }
        for (long a = ra.lo; a < ra.hi; ++a) {
          const long sd = d + a - pd;
          for (long b = rb.lo; b < rb.hi; ++b) {
            const long sh = h + b - ph;
            const WeightGradArgs args{
                xp.data() + ((n * D + sd) * H + sh) * static_cast<long>(row_pad), row.data(),
                gwp.data() + (a * kh + b) * kw * static_cast<long>(cin * coutp), cin, coutp, W};
            for (std::size_t v0 = 0; v0 < nvec; v0 += kMaxVectors) {
              const std::size_t co0 = v0 * Isa::kLanes;
              switch (std::min(kMaxVectors, nvec - v0)) {
                case 1: weight_grad_taps<Isa, 1>(args, kw, co0); break;
                case 2: weight_grad_taps<Isa, 2>(args, kw, co0); break;
                case 3: weight_grad_taps<Isa, 3>(args, kw, co0); break;
                default: weight_grad_taps<Isa, 4>(args, kw, co0); break;
              }
            }
          }
        }
      }
    }
  }
  for (std::size_t r = 0; r < g.taps() * cin; ++r) {
    for (std::size_t co = 0; co < cout; ++co) gw[r * cout + co] += gwp[r * coutp + co];
  }
  if (gb) {
    for (std::size_t co = 0; co < cout; ++co) gb[co] += gbp[co];
  }
}

}  // namespace flamesentinel::kernels::simd
