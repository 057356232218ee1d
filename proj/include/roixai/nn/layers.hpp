#pragma once

// Parameterized layers. Each layer owns tensors registered in a
// ParameterStore under a dotted name, which fixes checkpoint order.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/ops.hpp"
#include "roixai/core/random.hpp"
#include "roixai/nn/attention.hpp"
#include "roixai/nn/conv.hpp"
#include "roixai/nn/dropout.hpp"
#include "roixai/nn/norm.hpp"
#include "roixai/nn/pool.hpp"
#include "roixai/nn/upsample.hpp"

namespace roixai {

enum class LayerKind {
  conv,
  conv_transposed,
  upsample_bilinear,
  pool_max,
  pool_avg,
  pool_global_avg,
  batch_norm,
  instance_norm,
  layer_norm,
  dropout,
  linear,
  attention,
  activation,
};

enum class Activation { relu, leaky_relu, sigmoid, gelu };

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;
  std::size_t heads = 1;
  bool bias = true;

  void validate() const {
    if (kernel < 1 || stride < 1) throw std::invalid_argument("LayerSpec: kernel and stride must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("LayerSpec: dropout rate must lie in [0, 1)");
    if (kind == LayerKind::attention && (heads == 0 || out_channels % heads != 0)) {
      throw std::invalid_argument("LayerSpec: heads (" + std::to_string(heads) + ") must divide embedding width " +
                                  std::to_string(out_channels));
    }
  }
};

inline LayerSpec conv_spec(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1,
                           std::optional<std::size_t> padding = std::nullopt, bool bias = true) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = k;
  s.stride = stride;
  s.padding = padding.value_or(k / 2);
  s.bias = bias;
  return s;
}

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation a) {
  switch (a) {
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::gelu: return gelu(x);
  }
  throw std::logic_error("activate: unknown activation");
}

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <class T>
class ParameterStore {
 public:
  Tensor<T> add_parameter(const std::string& name, Shape shape, std::vector<T> values) {
    check_unique(name);
    auto t = Tensor<T>::from(std::move(shape), std::move(values), true);
    parameters_.push_back({name, t});
    return t;
  }

  Tensor<T> add_buffer(const std::string& name, Shape shape, T fill) {
    check_unique(name);
    auto t = Tensor<T>::full(std::move(shape), fill, false);
    buffers_.push_back({name, t});
    return t;
  }

  const std::vector<NamedTensor<T>>& parameters() const { return parameters_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

  Tensor<T> parameter(const std::string& name) const {
    for (const auto& p : parameters_)
      if (p.name == name) return p.tensor;
    throw std::invalid_argument("no parameter named '" + name + "'");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters_) n += p.tensor.numel();
    return n;
  }

 private:
  void check_unique(const std::string& name) const {
    for (const auto& p : parameters_)
      if (p.name == name) throw std::logic_error("duplicate parameter name " + name);
    for (const auto& p : buffers_)
      if (p.name == name) throw std::logic_error("duplicate buffer name " + name);
  }

  std::vector<NamedTensor<T>> parameters_;
  std::vector<NamedTensor<T>> buffers_;
};

namespace detail {
template <class T>
std::vector<T> normal_values(std::size_t n, double stddev, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
  return v;
}
}  // namespace detail

/// Convolution with He-normal weight initialization.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore<T>& store, const std::string& name, const LayerSpec& spec, Rng& rng) : spec_(spec) {
    spec.validate();
    const std::size_t fan_in = spec.in_channels * spec.kernel * spec.kernel;
    weight_ = store.add_parameter(name + ".weight", {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel},
                                  detail::normal_values<T>(fan_in * spec.out_channels, std::sqrt(2.0 / fan_in), rng));
    if (spec.bias) bias_ = store.add_parameter(name + ".bias", {spec.out_channels}, std::vector<T>(spec.out_channels, T(0)));
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return conv2d(x, weight_, bias_.defined() ? &bias_ : nullptr, spec_.stride, spec_.padding);
  }

  const Tensor<T>& weight() const { return weight_; }
  const LayerSpec& spec() const { return spec_; }

 private:
  LayerSpec spec_;
  Tensor<T> weight_, bias_;
};

template <class T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterStore<T>& store, const std::string& name, const LayerSpec& spec, Rng& rng) : spec_(spec) {
    spec.validate();
    const std::size_t fan_in = spec.in_channels * spec.kernel * spec.kernel;
    weight_ = store.add_parameter(name + ".weight", {spec.in_channels, spec.out_channels, spec.kernel, spec.kernel},
                                  detail::normal_values<T>(fan_in * spec.out_channels, std::sqrt(1.0 / fan_in), rng));
    if (spec.bias) bias_ = store.add_parameter(name + ".bias", {spec.out_channels}, std::vector<T>(spec.out_channels, T(0)));
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return conv_transpose2d(x, weight_, bias_.defined() ? &bias_ : nullptr, spec_.stride, spec_.padding);
  }

  bool defined() const { return weight_.defined(); }

 private:
  LayerSpec spec_;
  Tensor<T> weight_, bias_;
};

template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         bool bias = true) {
    weight_ = store.add_parameter(name + ".weight", {out, in}, detail::normal_values<T>(in * out, std::sqrt(1.0 / in), rng));
    if (bias) bias_ = store.add_parameter(name + ".bias", {out}, std::vector<T>(out, T(0)));
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight_, bias_.defined() ? &bias_ : nullptr); }

  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  Tensor<T> weight_, bias_;
};

template <class T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParameterStore<T>& store, const std::string& name, std::size_t channels) {
    gamma_ = store.add_parameter(name + ".gamma", {channels}, std::vector<T>(channels, T(1)));
    beta_ = store.add_parameter(name + ".beta", {channels}, std::vector<T>(channels, T(0)));
    running_mean_ = store.add_buffer(name + ".running_mean", {channels}, T(0));
    running_var_ = store.add_buffer(name + ".running_var", {channels}, T(1));
  }

  Tensor<T> operator()(const Tensor<T>& x, bool training) {
    return batch_norm(x, gamma_, beta_, running_mean_, running_var_, training);
  }

 private:
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
};

template <class T>
class InstanceNorm2d {
 public:
  InstanceNorm2d() = default;
  InstanceNorm2d(ParameterStore<T>& store, const std::string& name, std::size_t channels) {
    gamma_ = store.add_parameter(name + ".gamma", {channels}, std::vector<T>(channels, T(1)));
    beta_ = store.add_parameter(name + ".beta", {channels}, std::vector<T>(channels, T(0)));
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return instance_norm(x, gamma_, beta_); }

 private:
  Tensor<T> gamma_, beta_;
};

template <class T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore<T>& store, const std::string& name, std::size_t width) {
    gamma_ = store.add_parameter(name + ".gamma", {width}, std::vector<T>(width, T(1)));
    beta_ = store.add_parameter(name + ".beta", {width}, std::vector<T>(width, T(0)));
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma_, beta_); }

 private:
  Tensor<T> gamma_, beta_;
};

/// Multi-head self-attention with learned Q, K, V and output projections.
template <class T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore<T>& store, const std::string& name, std::size_t width, std::size_t heads, Rng& rng)
      : heads_(heads) {
    LayerSpec spec;
    spec.kind = LayerKind::attention;
    spec.in_channels = spec.out_channels = width;
    spec.heads = heads;
    spec.validate();
    q_ = Linear<T>(store, name + ".q", width, width, rng);
    k_ = Linear<T>(store, name + ".k", width, width, rng);
    v_ = Linear<T>(store, name + ".v", width, width, rng);
    o_ = Linear<T>(store, name + ".out", width, width, rng);
  }

  Tensor<T> operator()(const Tensor<T>& x, const std::vector<std::uint8_t>* key_mask = nullptr,
                       Tensor<T>* weights = nullptr) const {
    auto r = scaled_dot_product_attention(q_(x), k_(x), v_(x), heads_, key_mask);
    if (weights) *weights = r.weights;
    return o_(r.output);
  }

  std::size_t heads() const { return heads_; }
  const Linear<T>& value_projection() const { return v_; }
  const Linear<T>& output_projection() const { return o_; }

 private:
  std::size_t heads_ = 1;
  Linear<T> q_, k_, v_, o_;
};

}  // namespace roixai
