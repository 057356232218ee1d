#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "roixai/core/tensor.hpp"

namespace roixai {

namespace detail {

struct LerpTap {
  std::size_t lo, hi;
  double frac;
};

// Align-corners sampling: output index o maps to o·(in-1)/(out-1), so corner pixels coincide.
inline std::vector<LerpTap> align_corners_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = out > 1 ? static_cast<double>(o) * static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

/// Bilinear resampling of N×C×H×W to N×C×out_h×out_w with align-corners semantics.
template <class T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() != 4) throw std::invalid_argument("resize_bilinear: input must be N×C×H×W");
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("resize_bilinear: empty output extent");
  const std::size_t NC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto ty = detail::align_corners_taps(H, out_h);
  const auto tx = detail::align_corners_taps(W, out_w);
  std::vector<T> out(NC * out_h * out_w);
  const auto& xv = x.vec();
  for (std::size_t nc = 0; nc < NC; ++nc) {
    const T* src = xv.data() + nc * H * W;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const auto& a = ty[oy];
      const T fy = static_cast<T>(a.frac);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const auto& b = tx[ox];
        const T fx = static_cast<T>(b.frac);
        const T top = src[a.lo * W + b.lo] * (T(1) - fx) + src[a.lo * W + b.hi] * fx;
        const T bot = src[a.hi * W + b.lo] * (T(1) - fx) + src[a.hi * W + b.hi] * fx;
        out[(nc * out_h + oy) * out_w + ox] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  auto xn = x.node();
  return detail::make_result<T>({x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {x}, "resize_bilinear",
                                [xn, ty, tx, NC, H, W, out_h, out_w](detail::Node<T>& self) {
                                  if (!xn->requires_grad) return;
                                  for (std::size_t nc = 0; nc < NC; ++nc) {
                                    T* dst = xn->grad.data() + nc * H * W;
                                    for (std::size_t oy = 0; oy < out_h; ++oy) {
                                      const auto& a = ty[oy];
                                      const T fy = static_cast<T>(a.frac);
                                      for (std::size_t ox = 0; ox < out_w; ++ox) {
                                        const auto& b = tx[ox];
                                        const T fx = static_cast<T>(b.frac);
                                        const T g = self.grad[(nc * out_h + oy) * out_w + ox];
                                        dst[a.lo * W + b.lo] += g * (T(1) - fy) * (T(1) - fx);
                                        dst[a.lo * W + b.hi] += g * (T(1) - fy) * fx;
                                        dst[a.hi * W + b.lo] += g * fy * (T(1) - fx);
                                        dst[a.hi * W + b.hi] += g * fy * fx;
                                      }
                                    }
                                  }
                                });
}

/// Integer-factor bilinear upsampling (align corners).
template <class T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int factor) {
  if (factor < 1) throw std::invalid_argument("upsample_bilinear: factor must be >= 1");
  if (x.rank() != 4) throw std::invalid_argument("upsample_bilinear: input must be N×C×H×W");
  const auto f = static_cast<std::size_t>(factor);
  return resize_bilinear(x, x.dim(2) * f, x.dim(3) * f);
}

}  // namespace roixai
