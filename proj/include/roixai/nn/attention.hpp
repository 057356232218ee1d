#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/ops.hpp"

namespace roixai {

/// [N, L, H·d] -> [N·H, L, d]
template <class T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads) {
  if (x.rank() != 3 || heads == 0 || x.dim(2) % heads != 0) {
    throw std::invalid_argument("split_heads: width " + std::to_string(x.rank() == 3 ? x.dim(2) : 0) +
                                " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t N = x.dim(0), L = x.dim(1), d = x.dim(2) / heads;
  std::vector<T> out(x.numel());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(x.vec().data() + (n * L + l) * heads * d + h * d, d, out.data() + ((n * heads + h) * L + l) * d);
  auto xn = x.node();
  return detail::make_result<T>({N * heads, L, d}, std::move(out), {x}, "split_heads", [xn, N, L, heads, d](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t j = 0; j < d; ++j)
            xn->grad[(n * L + l) * heads * d + h * d + j] += self.grad[((n * heads + h) * L + l) * d + j];
  });
}

/// [N·H, L, d] -> [N, L, H·d]
template <class T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t heads) {
  if (x.rank() != 3 || heads == 0 || x.dim(0) % heads != 0) throw std::invalid_argument("merge_heads: bad shape");
  const std::size_t N = x.dim(0) / heads, L = x.dim(1), d = x.dim(2);
  std::vector<T> out(x.numel());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < L; ++l)
        std::copy_n(x.vec().data() + ((n * heads + h) * L + l) * d, d, out.data() + (n * L + l) * heads * d + h * d);
  auto xn = x.node();
  return detail::make_result<T>({N, L, heads * d}, std::move(out), {x}, "merge_heads", [xn, N, L, heads, d](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t l = 0; l < L; ++l)
          for (std::size_t j = 0; j < d; ++j)
            xn->grad[((n * heads + h) * L + l) * d + j] += self.grad[(n * L + l) * heads * d + h * d + j];
  });
}

template <class T>
struct AttentionResult {
  Tensor<T> output;   // [N, L, D] before the output projection
  Tensor<T> weights;  // [N·H, L, L], rows sum to 1
};

/// softmax(Q Kᵀ / √d_head) V per head, heads concatenated. Keys whose
/// `key_mask` entry is 0 receive zero weight.
template <class T>
AttentionResult<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                                std::size_t heads, const std::vector<std::uint8_t>* key_mask = nullptr) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw std::invalid_argument("attention: q, k, v must share shape [N, L, D]");
  }
  if (heads == 0 || q.dim(2) % heads != 0) {
    throw std::invalid_argument("attention: width " + std::to_string(q.dim(2)) + " not divisible by " +
                                std::to_string(heads) + " heads");
  }
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(q.dim(2) / heads)));
  auto qh = split_heads(q, heads), kh = split_heads(k, heads), vh = split_heads(v, heads);
  auto scores = scale(bmm(qh, kh, true), inv_sqrt);
  auto weights = softmax_last(scores, key_mask);
  return {merge_heads(bmm(weights, vh), heads), weights};
}

}  // namespace roixai
