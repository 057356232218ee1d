#pragma once

// Elementwise, reduction and structural ops over Tensor<T>.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/gemm.hpp"
#include "roixai/core/tensor.hpp"

namespace roixai {

namespace detail {

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

template <class T, class F, class DF>
Tensor<T> unary(const Tensor<T>& x, std::string_view name, F f, DF df) {
  const auto& xv = x.vec();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  auto xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, name, [xn, df](Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * df(xn->value[i], self.value[i]);
  });
}

inline bool guided() { return autograd_state().guided_rectifiers; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.vec()[i] + b.vec()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, "add", [an, bn](detail::Node<T>& self) {
    if (an->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    if (bn->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.vec()[i] - b.vec()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, "sub", [an, bn](detail::Node<T>& self) {
    if (an->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    if (bn->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.vec()[i] * b.vec()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [an, bn](detail::Node<T>& self) {
    if (an->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    if (bn->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return detail::unary<T>(x, "scale", [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return detail::unary<T>(x, "add_scalar", [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> square(const Tensor<T>& x) {
  return detail::unary<T>(x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

/// a + b where b's shape equals the trailing dims of a; b is broadcast over the leading dims.
template <class T>
Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()))) {
    throw std::invalid_argument("add_broadcast: " + shape_str(bs) + " is not a trailing shape of " + shape_str(as));
  }
  const std::size_t inner = b.numel();
  const std::size_t outer = a.numel() / inner;
  std::vector<T> out(a.numel());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = a.vec()[o * inner + i] + b.vec()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>(as, std::move(out), {a, b}, "add_broadcast",
                                [an, bn, inner, outer](detail::Node<T>& self) {
                                  if (an->requires_grad)
                                    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
                                  if (bn->requires_grad)
                                    for (std::size_t o = 0; o < outer; ++o)
                                      for (std::size_t i = 0; i < inner; ++i) bn->grad[i] += self.grad[o * inner + i];
                                });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (T v : x.vec()) acc += static_cast<double>(v);
  auto xn = x.node();
  return detail::make_result<T>({1}, {static_cast<T>(acc)}, {x}, "sum", [xn](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (auto& g : xn->grad) g += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  const auto n = static_cast<T>(x.numel());
  double acc = 0.0;
  for (T v : x.vec()) acc += static_cast<double>(v);
  auto xn = x.node();
  return detail::make_result<T>({1}, {static_cast<T>(acc / static_cast<double>(n))}, {x}, "mean",
                                [xn, n](detail::Node<T>& self) {
                                  if (!xn->requires_grad) return;
                                  const T g = self.grad[0] / n;
                                  for (auto& v : xn->grad) v += g;
                                });
}

/// Weighted sum Σ w_i x_i with constant weights; convenient scalarization for gradient checks.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& x, const std::vector<T>& weights) {
  if (weights.size() != x.numel()) throw std::invalid_argument("weighted_sum: weight count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += static_cast<double>(x.vec()[i]) * weights[i];
  auto xn = x.node();
  return detail::make_result<T>({1}, {static_cast<T>(acc)}, {x}, "weighted_sum", [xn, weights](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < weights.size(); ++i) xn->grad[i] += self.grad[0] * weights[i];
  });
}

/// Mean squared error between equal-shape tensors.
template <class T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mse");
  const std::size_t n = a.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.vec()[i]) - static_cast<double>(b.vec()[i]);
    acc += d * d;
  }
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>({1}, {static_cast<T>(acc / static_cast<double>(n))}, {a, b}, "mse",
                                [an, bn, n](detail::Node<T>& self) {
                                  const T k = T(2) * self.grad[0] / static_cast<T>(n);
                                  for (std::size_t i = 0; i < n; ++i) {
                                    const T d = an->value[i] - bn->value[i];
                                    if (an->requires_grad) an->grad[i] += k * d;
                                    if (bn->requires_grad) bn->grad[i] -= k * d;
                                  }
                                });
}

namespace detail {

struct AxisSplit {
  std::size_t outer, extent, inner;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace detail

/// Max along `axis`, keeping it with extent 1. Ties resolve to the first index.
template <class T>
Tensor<T> max_over(const Tensor<T>& x, std::size_t axis) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (sp.extent == 0) throw std::invalid_argument("max_over: empty axis");
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  const auto& xv = x.vec();
  auto arg = select_or_replay([&] {
    std::vector<std::uint32_t> a(sp.outer * sp.inner);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        std::uint32_t best = 0;
        for (std::size_t e = 1; e < sp.extent; ++e)
          if (xv[(o * sp.extent + e) * sp.inner + i] > xv[(o * sp.extent + best) * sp.inner + i])
            best = static_cast<std::uint32_t>(e);
        a[o * sp.inner + i] = best;
      }
    return a;
  });
  std::vector<T> out(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] = xv[(o * sp.extent + arg[o * sp.inner + i]) * sp.inner + i];
  auto xn = x.node();
  return detail::make_result<T>(out_shape, std::move(out), {x}, "max_over", [xn, arg, sp](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i)
        xn->grad[(o * sp.extent + arg[o * sp.inner + i]) * sp.inner + i] += self.grad[o * sp.inner + i];
  });
}

/// Mean along `axis`, keeping it with extent 1.
template <class T>
Tensor<T> mean_over(const Tensor<T>& x, std::size_t axis) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (sp.extent == 0) throw std::invalid_argument("mean_over: empty axis");
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  const auto& xv = x.vec();
  std::vector<T> out(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double acc = 0.0;
      for (std::size_t e = 0; e < sp.extent; ++e) acc += xv[(o * sp.extent + e) * sp.inner + i];
      out[o * sp.inner + i] = static_cast<T>(acc / static_cast<double>(sp.extent));
    }
  auto xn = x.node();
  return detail::make_result<T>(out_shape, std::move(out), {x}, "mean_over", [xn, sp](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    const T k = T(1) / static_cast<T>(sp.extent);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t e = 0; e < sp.extent; ++e)
        for (std::size_t i = 0; i < sp.inner; ++i) xn->grad[(o * sp.extent + e) * sp.inner + i] += k * self.grad[o * sp.inner + i];
  });
}

// ---------------------------------------------------------------------------
// Activations

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary<T>(
      x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary<T>(x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::unary<T>(
      x, "softplus", [](T v) { return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](T v, T) { return T(1) / (T(1) + std::exp(-v)); });
}

namespace detail {

template <class T>
Tensor<T> rectifier(const Tensor<T>& x, T negative_slope, std::string_view name) {
  const auto& xv = x.vec();
  auto mask = select_or_replay([&] {
    std::vector<std::uint32_t> m(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) m[i] = xv[i] > T(0) ? 1u : 0u;
    return m;
  });
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = mask[i] ? xv[i] : negative_slope * xv[i];
  auto xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, name, [xn, mask, negative_slope](Node<T>& self) {
    if (!xn->requires_grad) return;
    const bool guide = guided();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T g = self.grad[i];
      if (guide && g < T(0)) continue;
      xn->grad[i] += g * (mask[i] ? T(1) : negative_slope);
    }
  });
}

}  // namespace detail

/// max(x, 0); derivative 0 at the kink.
template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::rectifier<T>(x, T(0), "relu");
}

inline constexpr double kLeakySlope = 0.01;

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x) {
  return detail::rectifier<T>(x, static_cast<T>(kLeakySlope), "leaky_relu");
}

/// Exact (erf) GELU. Treated as a rectifier by the guided-gradient rule.
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  const auto& xv = x.vec();
  std::vector<T> out(xv.size());
  constexpr T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  auto xn = x.node();
  return detail::make_result<T>(x.shape(), std::move(out), {x}, "gelu", [xn](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    const bool guide = detail::guided();
    const T inv_sqrt_2pi = static_cast<T>(0.39894228040143267794);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T g = self.grad[i];
      if (guide && g < T(0)) continue;
      const T v = xn->value[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      xn->grad[i] += g * (cdf + v * pdf);
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// a[M,K] @ b[K,N]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " @ " + shape_str(b.shape()));
  }
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  std::vector<T> out(M * N, T(0));
  detail::gemm_nn(M, N, K, a.vec().data(), b.vec().data(), out.data());
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>({M, N}, std::move(out), {a, b}, "matmul", [an, bn, M, N, K](detail::Node<T>& self) {
    if (an->requires_grad) detail::gemm_nt(M, K, N, self.grad.data(), bn->value.data(), an->grad.data());
    if (bn->requires_grad) detail::gemm_tn(K, N, M, an->value.data(), self.grad.data(), bn->grad.data());
  });
}

/// Affine map over the last axis: y[..., out] = x[..., in] W[out, in]^T + b[out].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias = nullptr) {
  if (weight.rank() != 2 || x.rank() < 1 || x.shape().back() != weight.dim(1)) {
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                                shape_str(weight.shape()));
  }
  const std::size_t in = weight.dim(1), outf = weight.dim(0);
  const std::size_t rows = x.numel() / in;
  if (bias && bias->numel() != outf) throw std::invalid_argument("linear: bias size mismatch");
  Shape out_shape = x.shape();
  out_shape.back() = outf;
  std::vector<T> out(rows * outf, T(0));
  if (bias)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < outf; ++o) out[r * outf + o] = bias->vec()[o];
  detail::gemm_nt(rows, outf, in, x.vec().data(), weight.vec().data(), out.data());
  auto xn = x.node(), wn = weight.node();
  std::shared_ptr<detail::Node<T>> bn = bias ? bias->node() : nullptr;
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return detail::make_result<T>(out_shape, std::move(out), inputs, "linear",
                                [xn, wn, bn, rows, in, outf](detail::Node<T>& self) {
                                  if (xn->requires_grad)
                                    detail::gemm_nn(rows, in, outf, self.grad.data(), wn->value.data(), xn->grad.data());
                                  if (wn->requires_grad)
                                    detail::gemm_tn(outf, in, rows, self.grad.data(), xn->value.data(), wn->grad.data());
                                  if (bn && bn->requires_grad)
                                    for (std::size_t r = 0; r < rows; ++r)
                                      for (std::size_t o = 0; o < outf; ++o) bn->grad[o] += self.grad[r * outf + o];
                                });
}

/// Batched a[B,M,K] @ b[B,K,N], or b[B,N,K]^T when transpose_b.
template <class T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1))) {
    throw std::invalid_argument("bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t B = a.dim(0), M = a.dim(1), K = a.dim(2), N = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<T> out(B * M * N, T(0));
  for (std::size_t i = 0; i < B; ++i) {
    const T* ap = a.vec().data() + i * M * K;
    const T* bp = b.vec().data() + i * K * N;
    T* cp = out.data() + i * M * N;
    if (transpose_b) detail::gemm_nt(M, N, K, ap, bp, cp);
    else detail::gemm_nn(M, N, K, ap, bp, cp);
  }
  auto an = a.node(), bn = b.node();
  return detail::make_result<T>({B, M, N}, std::move(out), {a, b}, "bmm",
                                [an, bn, B, M, N, K, transpose_b](detail::Node<T>& self) {
                                  for (std::size_t i = 0; i < B; ++i) {
                                    const T* g = self.grad.data() + i * M * N;
                                    const T* av = an->value.data() + i * M * K;
                                    const T* bv = bn->value.data() + i * K * N;
                                    if (an->requires_grad) {
                                      T* ag = an->grad.data() + i * M * K;
                                      if (transpose_b) detail::gemm_nn(M, K, N, g, bv, ag);
                                      else detail::gemm_nt(M, K, N, g, bv, ag);
                                    }
                                    if (bn->requires_grad) {
                                      T* bg = bn->grad.data() + i * K * N;
                                      if (transpose_b) detail::gemm_tn(N, K, M, g, av, bg);
                                      else detail::gemm_tn(K, N, M, av, g, bg);
                                    }
                                  }
                                });
}

/// Softmax over the last axis. Positions where `key_mask` (length = last extent, or
/// rows*last) is zero receive probability exactly 0.
template <class T>
Tensor<T> softmax_last(const Tensor<T>& x, const std::vector<std::uint8_t>* key_mask = nullptr) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  if (key_mask && key_mask->size() != n) throw std::invalid_argument("softmax_last: mask length mismatch");
  std::vector<T> out(x.numel(), T(0));
  const auto& xv = x.vec();
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!key_mask || (*key_mask)[j]) mx = std::max(mx, xv[r * n + j]);
    T total = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      if (key_mask && !(*key_mask)[j]) continue;
      out[r * n + j] = std::exp(xv[r * n + j] - mx);
      total += out[r * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= total;
  }
  auto xn = x.node();
  return detail::make_result<T>(x.shape(), std::move(out), {x}, "softmax", [xn, n, rows](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[r * n + j] * self.value[r * n + j];
      for (std::size_t j = 0; j < n; ++j) xn->grad[r * n + j] += self.value[r * n + j] * (self.grad[r * n + j] - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Structural

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xn = x.node();
  return detail::make_result<T>(std::move(shape), x.vec(), {x}, "reshape", [xn](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

/// [B, M, N] -> [B, N, M]
template <class T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  if (x.rank() != 3) throw std::invalid_argument("transpose_last2: expected rank 3");
  const std::size_t B = x.dim(0), M = x.dim(1), N = x.dim(2);
  std::vector<T> out(x.numel());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j) out[(b * N + j) * M + i] = x.vec()[(b * M + i) * N + j];
  auto xn = x.node();
  return detail::make_result<T>({B, N, M}, std::move(out), {x}, "transpose", [xn, B, M, N](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) xn->grad[(b * M + i) * N + j] += self.grad[(b * N + j) * M + i];
  });
}

/// Concatenate along `axis`; all other extents must agree.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape out_shape = parts[0].shape();
  if (axis >= out_shape.size()) throw std::invalid_argument("concat: axis out of range");
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw std::invalid_argument("concat: rank mismatch");
    out_shape[axis] += s[axis];
    s[axis] = 0;
    Shape ref = parts[0].shape();
    ref[axis] = 0;
    if (s != ref) throw std::invalid_argument("concat: extent mismatch off the concatenation axis");
  }
  const auto sp = detail::split_axis(out_shape, axis);
  std::vector<T> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t e = p.dim(axis);
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(p.vec().data() + o * e * sp.inner, e * sp.inner, out.data() + (o * sp.extent + offset) * sp.inner);
    offset += e;
  }
  std::vector<std::shared_ptr<detail::Node<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_result<T>(out_shape, std::move(out), parts, "concat", [nodes, offsets, sp](detail::Node<T>& self) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      auto& n = nodes[k];
      if (!n->requires_grad) continue;
      const std::size_t e = n->value.size() / (sp.outer * sp.inner);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < e * sp.inner; ++i)
          n->grad[o * e * sp.inner + i] += self.grad[(o * sp.extent + offsets[k]) * sp.inner + i];
    }
  });
}

/// Slice [start, start+length) along `axis`.
template <class T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (start + length > sp.extent) throw std::invalid_argument("narrow: range exceeds extent");
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<T> out(sp.outer * length * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(x.vec().data() + (o * sp.extent + start) * sp.inner, length * sp.inner, out.data() + o * length * sp.inner);
  auto xn = x.node();
  return detail::make_result<T>(out_shape, std::move(out), {x}, "narrow", [xn, sp, start, length](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < length * sp.inner; ++i)
        xn->grad[(o * sp.extent + start) * sp.inner + i] += self.grad[o * length * sp.inner + i];
  });
}

/// Repeat a tensor with leading extent 1 `count` times along axis 0.
template <class T>
Tensor<T> repeat_leading(const Tensor<T>& x, std::size_t count) {
  if (x.rank() < 1 || x.dim(0) != 1) throw std::invalid_argument("repeat_leading: leading extent must be 1");
  Shape out_shape = x.shape();
  out_shape[0] = count;
  const std::size_t inner = x.numel();
  std::vector<T> out(inner * count);
  for (std::size_t c = 0; c < count; ++c) std::copy_n(x.vec().data(), inner, out.data() + c * inner);
  auto xn = x.node();
  return detail::make_result<T>(out_shape, std::move(out), {x}, "repeat", [xn, inner, count](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t c = 0; c < count; ++c)
      for (std::size_t i = 0; i < inner; ++i) xn->grad[i] += self.grad[c * inner + i];
  });
}

}  // namespace roixai
