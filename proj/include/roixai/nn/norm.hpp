#pragma once

// Batch, instance and layer normalization. Groups are normalized to zero mean
// and unit (biased) variance with eps = 1e-5 inside the square root, then an
// affine scale/shift is applied.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "roixai/core/tensor.hpp"

namespace roixai {

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

namespace detail {

// Normalizes `count` groups. Element j of group g lives at offset(g, j) and uses
// affine parameter param(g, j).
template <class T, class Offset, class Param>
Tensor<T> normalize_groups(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, std::size_t groups,
                           std::size_t group_size, Offset offset, Param param, std::string_view name,
                           std::vector<T>* batch_mean = nullptr, std::vector<T>* batch_var = nullptr) {
  const auto& xv = x.vec();
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(groups);
  std::vector<T> out(xv.size());
  for (std::size_t g = 0; g < groups; ++g) {
    double m = 0.0;
    for (std::size_t j = 0; j < group_size; ++j) m += xv[offset(g, j)];
    m /= static_cast<double>(group_size);
    double v = 0.0;
    for (std::size_t j = 0; j < group_size; ++j) {
      const double d = xv[offset(g, j)] - m;
      v += d * d;
    }
    v /= static_cast<double>(group_size);
    if (batch_mean) (*batch_mean)[g] = static_cast<T>(m);
    if (batch_var) (*batch_var)[g] = static_cast<T>(v);
    const T is = static_cast<T>(1.0 / std::sqrt(v + kNormEpsilon));
    inv_std[g] = is;
    for (std::size_t j = 0; j < group_size; ++j) {
      const std::size_t o = offset(g, j);
      const std::size_t p = param(g, j);
      xhat[o] = (xv[o] - static_cast<T>(m)) * is;
      out[o] = xhat[o] * gamma.vec()[p] + beta.vec()[p];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_result<T>(x.shape(), std::move(out), {x, gamma, beta}, name,
                        [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), groups, group_size, offset,
                         param](Node<T>& self) {
                          for (std::size_t g = 0; g < groups; ++g) {
                            double sum_d = 0.0, sum_dx = 0.0;
                            for (std::size_t j = 0; j < group_size; ++j) {
                              const std::size_t o = offset(g, j);
                              const std::size_t p = param(g, j);
                              const T dy = self.grad[o];
                              if (gn->requires_grad) gn->grad[p] += dy * xhat[o];
                              if (bn->requires_grad) bn->grad[p] += dy;
                              const double dxhat = static_cast<double>(dy) * gn->value[p];
                              sum_d += dxhat;
                              sum_dx += dxhat * xhat[o];
                            }
                            if (!xn->requires_grad) continue;
                            const double md = sum_d / static_cast<double>(group_size);
                            const double mdx = sum_dx / static_cast<double>(group_size);
                            for (std::size_t j = 0; j < group_size; ++j) {
                              const std::size_t o = offset(g, j);
                              const double dxhat = static_cast<double>(self.grad[o]) * gn->value[param(g, j)];
                              xn->grad[o] += static_cast<T>(inv_std[g] * (dxhat - md - xhat[o] * mdx));
                            }
                          }
                        });
}

template <class T>
void check_affine(const Tensor<T>& gamma, const Tensor<T>& beta, std::size_t n, const char* op) {
  if (gamma.numel() != n || beta.numel() != n) {
    throw std::invalid_argument(std::string(op) + ": scale/shift must have " + std::to_string(n) + " entries");
  }
}

}  // namespace detail

/// Per-(sample, channel) normalization over H×W.
template <class T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  if (x.rank() != 4) throw std::invalid_argument("instance_norm: input must be N×C×H×W");
  const std::size_t C = x.dim(1), HW = x.dim(2) * x.dim(3);
  detail::check_affine(gamma, beta, C, "instance_norm");
  return detail::normalize_groups<T>(
      x, gamma, beta, x.dim(0) * C, HW, [HW](std::size_t g, std::size_t j) { return g * HW + j; },
      [C](std::size_t g, std::size_t) { return g % C; }, "instance_norm");
}

/// Normalization over the last axis, affine per feature.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  const std::size_t D = x.shape().back();
  detail::check_affine(gamma, beta, D, "layer_norm");
  return detail::normalize_groups<T>(
      x, gamma, beta, x.numel() / D, D, [D](std::size_t g, std::size_t j) { return g * D + j; },
      [](std::size_t, std::size_t j) { return j; }, "layer_norm");
}

/// Per-channel normalization over (N, H, W). Training mode uses batch statistics
/// and updates the running buffers with momentum 0.1; evaluation mode uses the buffers.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, bool training) {
  if (x.rank() != 4 && x.rank() != 2) throw std::invalid_argument("batch_norm: input must be N×C×H×W or N×C");
  const std::size_t N = x.dim(0), C = x.dim(1);
  const std::size_t HW = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  detail::check_affine(gamma, beta, C, "batch_norm");
  if (running_mean.numel() != C || running_var.numel() != C) throw std::invalid_argument("batch_norm: buffer size mismatch");
  auto offset = [C, HW](std::size_t g, std::size_t j) { return ((j / HW) * C + g) * HW + j % HW; };
  auto param = [](std::size_t g, std::size_t) { return g; };
  if (training) {
    std::vector<T> bm(C), bv(C);
    auto y = detail::normalize_groups<T>(x, gamma, beta, C, N * HW, offset, param, "batch_norm", &bm, &bv);
    const double count = static_cast<double>(N * HW);
    auto rm = running_mean.mutable_values();
    auto rv = running_var.mutable_values();
    for (std::size_t c = 0; c < C; ++c) {
      const double unbiased = count > 1 ? bv[c] * count / (count - 1) : bv[c];
      rm[c] = static_cast<T>((1 - kBatchNormMomentum) * rm[c] + kBatchNormMomentum * bm[c]);
      rv[c] = static_cast<T>((1 - kBatchNormMomentum) * rv[c] + kBatchNormMomentum * unbiased);
    }
    return y;
  }
  // Evaluation: fixed affine map per channel.
  std::vector<T> out(x.numel());
  std::vector<T> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = static_cast<T>(1.0 / std::sqrt(running_var.vec()[c] + kNormEpsilon));
  const auto& xv = x.vec();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < HW; ++p) {
        const std::size_t o = (n * C + c) * HW + p;
        out[o] = (xv[o] - running_mean.vec()[c]) * inv_std[c] * gamma.vec()[c] + beta.vec()[c];
      }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  std::vector<T> mean_copy(running_mean.values().begin(), running_mean.values().end());
  return detail::make_result<T>(x.shape(), std::move(out), {x, gamma, beta}, "batch_norm_eval",
                                [xn, gn, bn, inv_std, mean_copy, N, C, HW](detail::Node<T>& self) {
                                  for (std::size_t n = 0; n < N; ++n)
                                    for (std::size_t c = 0; c < C; ++c)
                                      for (std::size_t p = 0; p < HW; ++p) {
                                        const std::size_t o = (n * C + c) * HW + p;
                                        const T dy = self.grad[o];
                                        const T xhat = (xn->value[o] - mean_copy[c]) * inv_std[c];
                                        if (xn->requires_grad) xn->grad[o] += dy * gn->value[c] * inv_std[c];
                                        if (gn->requires_grad) gn->grad[c] += dy * xhat;
                                        if (bn->requires_grad) bn->grad[c] += dy;
                                      }
                                });
}

}  // namespace roixai
