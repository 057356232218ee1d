#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/tensor.hpp"
#include "roixai/nn/conv.hpp"

namespace roixai {

namespace detail {
template <class T>
void check_pool_input(const Tensor<T>& x, std::size_t window, std::size_t padding, const char* op) {
  if (x.rank() != 4) throw std::invalid_argument(std::string(op) + ": input must be N×C×H×W");
  if (window < 1) throw std::invalid_argument(std::string(op) + ": window must be >= 1");
  if (window > x.dim(2) + 2 * padding || window > x.dim(3) + 2 * padding) {
    throw std::invalid_argument(std::string(op) + ": window " + std::to_string(window) + " larger than input " +
                                shape_str(x.shape()));
  }
}
}  // namespace detail

/// Max pooling; padded positions never win. Ties resolve to the first index in scan order.
template <class T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t window, std::size_t stride = 0, std::size_t padding = 0) {
  if (stride == 0) stride = window;
  detail::check_pool_input(x, window, padding, "max_pool2d");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = conv_out_extent(H, window, stride, padding), Wo = conv_out_extent(W, window, stride, padding);
  const auto& xv = x.vec();
  auto arg = select_or_replay([&] {
    std::vector<std::uint32_t> a(N * C * Ho * Wo);
    for (std::size_t nc = 0; nc < N * C; ++nc)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          std::uint32_t best = 0;
          T best_v = -std::numeric_limits<T>::infinity();
          bool found = false;
          for (std::size_t ky = 0; ky < window; ++ky)
            for (std::size_t kx = 0; kx < window; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(H) || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              const auto idx = static_cast<std::uint32_t>((nc * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix));
              if (!found || xv[idx] > best_v) {
                best = idx;
                best_v = xv[idx];
                found = true;
              }
            }
          a[(nc * Ho + oy) * Wo + ox] = best;
        }
    return a;
  });
  std::vector<T> out(arg.size());
  for (std::size_t i = 0; i < arg.size(); ++i) out[i] = xv[arg[i]];
  auto xn = x.node();
  return detail::make_result<T>({N, C, Ho, Wo}, std::move(out), {x}, "max_pool2d", [xn, arg](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < arg.size(); ++i) xn->grad[arg[i]] += self.grad[i];
  });
}

/// Average pooling over full windows (no padding).
template <class T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t window, std::size_t stride = 0) {
  if (stride == 0) stride = window;
  detail::check_pool_input(x, window, 0, "avg_pool2d");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = conv_out_extent(H, window, stride, 0), Wo = conv_out_extent(W, window, stride, 0);
  const T area = static_cast<T>(window * window);
  std::vector<T> out(N * C * Ho * Wo, T(0));
  const auto& xv = x.vec();
  for (std::size_t nc = 0; nc < N * C; ++nc)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        T acc = T(0);
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) acc += xv[(nc * H + oy * stride + ky) * W + ox * stride + kx];
        out[(nc * Ho + oy) * Wo + ox] = acc / area;
      }
  auto xn = x.node();
  return detail::make_result<T>({N, C, Ho, Wo}, std::move(out), {x}, "avg_pool2d",
                                [xn, N, C, H, W, Ho, Wo, window, stride, area](detail::Node<T>& self) {
                                  if (!xn->requires_grad) return;
                                  for (std::size_t nc = 0; nc < N * C; ++nc)
                                    for (std::size_t oy = 0; oy < Ho; ++oy)
                                      for (std::size_t ox = 0; ox < Wo; ++ox) {
                                        const T g = self.grad[(nc * Ho + oy) * Wo + ox] / area;
                                        for (std::size_t ky = 0; ky < window; ++ky)
                                          for (std::size_t kx = 0; kx < window; ++kx)
                                            xn->grad[(nc * H + oy * stride + ky) * W + ox * stride + kx] += g;
                                      }
                                });
}

/// Spatial mean per (sample, channel): N×C×H×W -> N×C.
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: input must be N×C×H×W");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<T> out(N * C);
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    T acc = T(0);
    for (std::size_t p = 0; p < HW; ++p) acc += x.vec()[nc * HW + p];
    out[nc] = acc / static_cast<T>(HW);
  }
  auto xn = x.node();
  return detail::make_result<T>({N, C}, std::move(out), {x}, "global_avg_pool", [xn, HW](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t nc = 0; nc < self.grad.size(); ++nc) {
      const T g = self.grad[nc] / static_cast<T>(HW);
      for (std::size_t p = 0; p < HW; ++p) xn->grad[nc * HW + p] += g;
    }
  });
}

}  // namespace roixai
