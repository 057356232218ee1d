#pragma once

// 2-D convolution and its adjoint (transposed convolution), via im2col + GEMM.
// Layouts: input N×C×H×W; conv weight Cout×Cin×k×k; transposed-conv weight
// Cin×Cout×k×k (the same array a conv with swapped channel roles would use).

#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/gemm.hpp"
#include "roixai/core/tensor.hpp"

namespace roixai {

struct ConvGeometry {
  std::size_t channels, height, width;  // image side (conv input / convT output)
  std::size_t kernel, stride, padding;
  std::size_t out_height, out_width;    // column side (conv output / convT input)

  std::size_t patch() const { return channels * kernel * kernel; }
  std::size_t positions() const { return out_height * out_width; }
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < k) throw std::invalid_argument("conv: kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

inline std::size_t conv_transposed_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  const std::size_t full = (in - 1) * stride + k;
  if (full <= 2 * pad) throw std::invalid_argument("conv_transposed: padding consumes the whole output");
  return full - 2 * pad;
}

namespace detail {

template <class T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* row = col + ((c * g.kernel + ky) * g.kernel + kx) * P;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          T* dst = row + oy * g.out_width;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill_n(dst, g.out_width, T(0));
            continue;
          }
          const T* src = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? T(0) : src[ix];
          }
        }
      }
}

template <class T>
void col2im(const T* col, const ConvGeometry& g, T* img) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = col + ((c * g.kernel + ky) * g.kernel + kx) * P;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const T* src = row + oy * g.out_width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += src[ox];
          }
        }
      }
}

inline bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1 && g.padding == 0; }

template <class T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, std::size_t weight_in_axis,
                     const char* op) {
  if (x.rank() != 4) throw std::invalid_argument(std::string(op) + ": input must be N×C×H×W, got " + shape_str(x.shape()));
  if (w.rank() != 4 || w.dim(2) != w.dim(3)) {
    throw std::invalid_argument(std::string(op) + ": weight must be square 4-D, got " + shape_str(w.shape()));
  }
  if (w.dim(weight_in_axis) != x.dim(1)) {
    throw std::invalid_argument(std::string(op) + ": channel mismatch, input has " + std::to_string(x.dim(1)) +
                                " channels but weight expects " + std::to_string(w.dim(weight_in_axis)));
  }
  const std::size_t out_ch = w.dim(1 - weight_in_axis);
  if (b && b->numel() != out_ch) throw std::invalid_argument(std::string(op) + ": bias size mismatch");
}

}  // namespace detail

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias, std::size_t stride,
                 std::size_t padding) {
  detail::check_conv_args(x, weight, bias, 1, "conv2d");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const std::size_t N = x.dim(0), Cout = weight.dim(0), k = weight.dim(2);
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, stride, padding, 0, 0};
  g.out_height = conv_out_extent(g.height, k, stride, padding);
  g.out_width = conv_out_extent(g.width, k, stride, padding);
  const std::size_t K = g.patch(), P = g.positions(), img = g.channels * g.height * g.width;

  std::vector<T> out(N * Cout * P, T(0));
  std::vector<T> col(detail::is_pointwise(g) ? 0 : K * P);
  for (std::size_t n = 0; n < N; ++n) {
    T* o = out.data() + n * Cout * P;
    if (bias)
      for (std::size_t c = 0; c < Cout; ++c) std::fill_n(o + c * P, P, bias->vec()[c]);
    const T* src = x.vec().data() + n * img;
    if (!col.empty()) {
      detail::im2col(src, g, col.data());
      src = col.data();
    }
    detail::gemm_nn(Cout, P, K, weight.vec().data(), src, o);
  }

  auto xn = x.node(), wn = weight.node();
  std::shared_ptr<detail::Node<T>> bn = bias ? bias->node() : nullptr;
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return detail::make_result<T>(
      {N, Cout, g.out_height, g.out_width}, std::move(out), inputs, "conv2d",
      [xn, wn, bn, g, N, Cout, K, P, img](detail::Node<T>& self) {
        const bool pointwise = detail::is_pointwise(g);
        std::vector<T> col(pointwise ? 0 : K * P);
        std::vector<T> dcol(pointwise ? 0 : K * P);
        for (std::size_t n = 0; n < N; ++n) {
          const T* go = self.grad.data() + n * Cout * P;
          if (bn && bn->requires_grad)
            for (std::size_t c = 0; c < Cout; ++c)
              for (std::size_t p = 0; p < P; ++p) bn->grad[c] += go[p + c * P];
          if (wn->requires_grad) {
            const T* src = xn->value.data() + n * img;
            if (!pointwise) {
              detail::im2col(src, g, col.data());
              src = col.data();
            }
            detail::gemm_nt(Cout, K, P, go, src, wn->grad.data());
          }
          if (xn->requires_grad) {
            if (pointwise) {
              detail::gemm_tn(K, P, Cout, wn->value.data(), go, xn->grad.data() + n * img);
            } else {
              std::fill(dcol.begin(), dcol.end(), T(0));
              detail::gemm_tn(K, P, Cout, wn->value.data(), go, dcol.data());
              detail::col2im(dcol.data(), g, xn->grad.data() + n * img);
            }
          }
        }
      });
}

/// Adjoint of conv2d with the same kernel/stride/padding. Output extent (H-1)·stride - 2·pad + k.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias, std::size_t stride,
                           std::size_t padding) {
  detail::check_conv_args(x, weight, bias, 0, "conv_transpose2d");
  if (stride < 1) throw std::invalid_argument("conv_transpose2d: stride must be >= 1");
  const std::size_t N = x.dim(0), Cin = x.dim(1), Cout = weight.dim(1), k = weight.dim(2);
  ConvGeometry g{Cout, 0, 0, k, stride, padding, x.dim(2), x.dim(3)};
  g.height = conv_transposed_out_extent(x.dim(2), k, stride, padding);
  g.width = conv_transposed_out_extent(x.dim(3), k, stride, padding);
  const std::size_t K = g.patch(), P = g.positions(), img = Cout * g.height * g.width;

  std::vector<T> out(N * img, T(0));
  std::vector<T> col(K * P);
  for (std::size_t n = 0; n < N; ++n) {
    std::fill(col.begin(), col.end(), T(0));
    detail::gemm_tn(K, P, Cin, weight.vec().data(), x.vec().data() + n * Cin * P, col.data());
    T* o = out.data() + n * img;
    detail::col2im(col.data(), g, o);
    if (bias)
      for (std::size_t c = 0; c < Cout; ++c)
        for (std::size_t p = 0; p < g.height * g.width; ++p) o[c * g.height * g.width + p] += bias->vec()[c];
  }

  auto xn = x.node(), wn = weight.node();
  std::shared_ptr<detail::Node<T>> bn = bias ? bias->node() : nullptr;
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return detail::make_result<T>(
      {N, Cout, g.height, g.width}, std::move(out), inputs, "conv_transpose2d",
      [xn, wn, bn, g, N, Cin, Cout, K, P, img](detail::Node<T>& self) {
        std::vector<T> col(K * P);
        const std::size_t HW = g.height * g.width;
        for (std::size_t n = 0; n < N; ++n) {
          const T* go = self.grad.data() + n * img;
          if (bn && bn->requires_grad)
            for (std::size_t c = 0; c < Cout; ++c)
              for (std::size_t p = 0; p < HW; ++p) bn->grad[c] += go[c * HW + p];
          detail::im2col(go, g, col.data());
          if (xn->requires_grad) detail::gemm_nn(Cin, P, K, wn->value.data(), col.data(), xn->grad.data() + n * Cin * P);
          if (wn->requires_grad) detail::gemm_nt(Cin, K, P, xn->value.data() + n * Cin * P, col.data(), wn->grad.data());
        }
      });
}

}  // namespace roixai
