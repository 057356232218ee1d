#pragma once

#include <stdexcept>
#include <vector>

#include "roixai/core/random.hpp"
#include "roixai/core/tensor.hpp"

namespace roixai {

/// Inverted dropout: at train time survivors are scaled by 1/(1-p); evaluation is the identity.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = rng.bernoulli(rate) ? T(0) : keep_scale;
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.vec()[i] * mask[i];
  auto xn = x.node();
  return detail::make_result<T>(x.shape(), std::move(out), {x}, "dropout", [xn, mask](detail::Node<T>& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < mask.size(); ++i) xn->grad[i] += self.grad[i] * mask[i];
  });
}

}  // namespace roixai
