#pragma once

// Test-only helpers: seeded generators and brute-force reference
// implementations that share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <span>
#include <cstdint>
#include <vector>

#include "roixai/core/random.hpp"
#include "roixai/core/tensor.hpp"

namespace roixai::testing {

template <class T = double>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  Rng rng(seed);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>::from(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> random_weights(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(n);
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

// Direct sliding-window convolution, x N×C×H×W, w O×C×k×k.
inline std::vector<double> naive_conv2d(const std::vector<double>& x, std::size_t N, std::size_t C, std::size_t H,
                                        std::size_t W, const std::vector<double>& w, std::size_t O, std::size_t k,
                                        const std::vector<double>& bias, std::size_t stride, std::size_t pad,
                                        std::size_t& Ho, std::size_t& Wo) {
  Ho = (H + 2 * pad - k) / stride + 1;
  Wo = (W + 2 * pad - k) / stride + 1;
  std::vector<double> out(N * O * Ho * Wo, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                acc += x[((n * C + c) * H + iy) * W + ix] * w[((o * C + c) * k + ky) * k + kx];
              }
          out[((n * O + o) * Ho + oy) * Wo + ox] = acc;
        }
  return out;
}

// Window scan pooling on one N×C×H×W array (no padding).
inline std::vector<double> naive_pool(const std::vector<double>& x, std::size_t NC, std::size_t H, std::size_t W,
                                      std::size_t window, std::size_t stride, bool max_mode) {
  const std::size_t Ho = (H - window) / stride + 1, Wo = (W - window) / stride + 1;
  std::vector<double> out;
  for (std::size_t c = 0; c < NC; ++c)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double acc = max_mode ? -1e300 : 0.0;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) {
            const double v = x[(c * H + oy * stride + ky) * W + ox * stride + kx];
            acc = max_mode ? std::max(acc, v) : acc + v;
          }
        out.push_back(max_mode ? acc : acc / static_cast<double>(window * window));
      }
  return out;
}

// Plain matrix product of row-major [M,K] and [K,N].
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t M,
                                        std::size_t K, std::size_t N) {
  std::vector<double> c(M * N, 0.0);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t k = 0; k < K; ++k) c[i * N + j] += a[i * K + k] * b[k * N + j];
  return c;
}

inline std::vector<double> naive_transpose(const std::vector<double>& a, std::size_t M, std::size_t N) {
  std::vector<double> t(M * N);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) t[j * M + i] = a[i * N + j];
  return t;
}

template <class T>
double max_abs_diff(std::span<const T> a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace roixai::testing
