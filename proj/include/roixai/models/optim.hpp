#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/nn/layers.hpp"

namespace roixai {

/// Adam with decoupled weight decay. Moment buffers are keyed by parameter
/// name so state survives a checkpoint roundtrip.
template <class T>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  struct Moments {
    std::vector<T> m, v;
  };

  Adam() = default;
  Adam(double learning_rate, double weight_decay) : lr_(learning_rate), weight_decay_(weight_decay) {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("Adam: learning rate must be >= 0");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("Adam: weight decay must be >= 0");
  }

  /// Applies one update to every parameter that received a gradient.
  void step(const std::vector<NamedTensor<T>>& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (const auto& p : params) {
      Tensor<T> tensor = p.tensor;
      if (!tensor.has_grad()) continue;
      auto& st = moments_[p.name];
      if (st.m.empty()) st.m.assign(tensor.numel(), T(0)), st.v.assign(tensor.numel(), T(0));
      auto g = tensor.grad();
      auto w = tensor.mutable_values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        const double m = kBeta1 * st.m[i] + (1.0 - kBeta1) * gi;
        const double v = kBeta2 * st.v[i] + (1.0 - kBeta2) * gi * gi;
        st.m[i] = static_cast<T>(m);
        st.v[i] = static_cast<T>(v);
        const double update = (m / c1) / (std::sqrt(v / c2) + kEpsilon) + weight_decay_ * w[i];
        w[i] = static_cast<T>(w[i] - lr_ * update);
      }
    }
  }

  std::size_t steps() const { return t_; }
  void set_steps(std::size_t t) { t_ = t; }
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  double lr_ = 1e-4;
  double weight_decay_ = 0.0;
  std::size_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace roixai
