#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "roixai/core/ops.hpp"

namespace roixai {

struct LossConfig {
  double lambda_recon = 1.0;
  double bce_clamp = 1e-6;

  void validate() const {
    if (!(lambda_recon >= 0.0)) throw std::invalid_argument("LossConfig: lambda_recon must be >= 0");
    if (!(bce_clamp > 0.0 && bce_clamp <= 1e-4)) throw std::invalid_argument("LossConfig: bce_clamp must lie in (0, 1e-4]");
  }
};

inline void check_label(double label) {
  if (label != 0.0 && label != 1.0) throw std::invalid_argument("label must be 0 or 1, got " + std::to_string(label));
}

/// -[y ln p + (1-y) ln(1-p)] on a single probability clamped to [eps, 1-eps].
/// Clamped inputs receive zero gradient.
template <class T>
Tensor<T> binary_cross_entropy(const Tensor<T>& probability, double label, double eps) {
  check_label(label);
  if (probability.numel() != 1) throw std::invalid_argument("binary_cross_entropy: expected one probability");
  const double raw = static_cast<double>(probability.item());
  if (!(raw >= 0.0 && raw <= 1.0)) throw std::domain_error("binary_cross_entropy: probability outside [0, 1]");
  const double p = std::clamp(raw, eps, 1.0 - eps);
  const bool clamped = p != raw;
  const double loss = -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
  const double dp = clamped ? 0.0 : (1.0 - label) / (1.0 - p) - label / p;
  auto pn = probability.node();
  return detail::make_result<T>({1}, {static_cast<T>(loss)}, {probability}, "bce", [pn, dp](detail::Node<T>& self) {
    if (pn->requires_grad) pn->grad[0] += static_cast<T>(self.grad[0] * dp);
  });
}

/// BCE(probability, label) + lambda_recon · MSE(recon, target).
template <class T>
Tensor<T> combined_loss(const Tensor<T>& recon, const Tensor<T>& target, const Tensor<T>& probability, double label,
                        const LossConfig& cfg) {
  cfg.validate();
  auto bce = binary_cross_entropy(probability, label, cfg.bce_clamp);
  if (cfg.lambda_recon == 0.0) return bce;
  return add(bce, scale(mse(recon, target), static_cast<T>(cfg.lambda_recon)));
}

}  // namespace roixai
