#pragma once

// Gradient attribution methods over zoo models. Every method takes a slice
// batch [s, 1, H, W] and returns one H×W grid per slice.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "roixai/models/zoo.hpp"

namespace roixai {

enum class Method { saliency, smoothgrad, guided_backprop, gradcam, guided_gradcam };
enum class Target { class_logit, recon_loss, latent_energy };

namespace detail {
inline constexpr std::array<std::pair<Method, std::string_view>, 5> kMethodNames{{
    {Method::saliency, "saliency"},
    {Method::smoothgrad, "smoothgrad"},
    {Method::guided_backprop, "guided_backprop"},
    {Method::gradcam, "gradcam"},
    {Method::guided_gradcam, "guided_gradcam"},
}};
inline constexpr std::array<std::pair<Target, std::string_view>, 3> kTargetNames{{
    {Target::class_logit, "class_logit"},
    {Target::recon_loss, "recon_loss"},
    {Target::latent_energy, "latent_energy"},
}};
}  // namespace detail

inline std::string_view to_string(Method m) { return detail::enum_name(m, detail::kMethodNames); }
inline std::string_view to_string(Target t) { return detail::enum_name(t, detail::kTargetNames); }
inline Method parse_method(std::string_view s) { return detail::parse_enum(s, detail::kMethodNames, "attribution method"); }
inline Target parse_target(std::string_view s) { return detail::parse_enum(s, detail::kTargetNames, "attribution target"); }

struct AttributionMap {
  Method method = Method::saliency;
  std::size_t slices = 0, height = 0, width = 0;
  std::vector<double> values;  // slices × height × width
  std::pair<double, double> value_range{0.0, 0.0};

  // Grad-CAM only: the map before upsampling, slices × coarse_height × coarse_width.
  std::size_t coarse_height = 0, coarse_width = 0;
  std::vector<double> coarse;

  std::size_t slice_size() const { return height * width; }
  std::span<const double> slice(std::size_t s) const {
    if (s >= slices) throw std::out_of_range("attribution map: slice index out of range");
    return std::span<const double>(values).subspan(s * slice_size(), slice_size());
  }
  void update_range() {
    if (values.empty()) return;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    value_range = {*lo, *hi};
  }
};

struct SmoothGradParams {
  std::size_t n = 25;
  double sigma = 0.15;  // fraction of the input value range

  void validate() const {
    if (n < 1) throw std::invalid_argument("smoothgrad: n must be >= 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("smoothgrad: sigma must be >= 0");
  }
};

/// Scalar function of the slice batch whose input gradient is attributed.
template <class T>
using Scorer = std::function<Tensor<T>(const Tensor<T>&)>;

template <class T>
Target default_target(const Model<T>& model) {
  return model.is_classifier() ? Target::class_logit : Target::latent_energy;
}

/// Evaluation-mode scorer for a model. latent_energy sums the activations at
/// `tap_layer` (the model's default tap when empty).
template <class T>
Scorer<T> model_scorer(Model<T>& model, Target target, std::string tap_layer = {}) {
  switch (target) {
    case Target::class_logit:
      if (!model.is_classifier()) {
        throw std::invalid_argument("class_logit target requested on a pure autoencoder; use recon_loss or latent_energy");
      }
      return [&model](const Tensor<T>& x) { return model.forward(x, {}).logit; };
    case Target::recon_loss:
      if (!model.is_reconstructor()) throw std::invalid_argument("recon_loss target requires a model with a decoder");
      return [&model](const Tensor<T>& x) { return mse(model.forward(x, {}).reconstruction, x); };
    case Target::latent_energy: {
      if (tap_layer.empty()) tap_layer = model.default_tap();
      return [&model, tap_layer](const Tensor<T>& x) {
        auto tap = model.taps().attach(tap_layer);
        model.forward(x, {});
        return sum(tap.activations());
      };
    }
  }
  throw std::logic_error("model_scorer: unknown target");
}

namespace detail {

inline void check_batch_shape(const Shape& s) {
  if (s.size() != 4 || s[1] != 1 || s[0] == 0) {
    throw std::invalid_argument("attribution input must be [slices, 1, H, W], got " + shape_str(s));
  }
}

template <class T>
std::vector<T> input_gradient(const Scorer<T>& scorer, const Tensor<T>& slices) {
  auto x = slices.detach(true);
  auto score = scorer(x);
  if (score.numel() != 1) throw std::invalid_argument("attribution target must be a scalar");
  backward(score);
  if (!x.has_grad()) return std::vector<T>(x.numel(), T(0));
  return {x.grad().begin(), x.grad().end()};
}

template <class T>
AttributionMap make_map(Method method, const Shape& shape) {
  AttributionMap m;
  m.method = method;
  m.slices = shape[0];
  m.height = shape[2];
  m.width = shape[3];
  m.values.assign(m.slices * m.height * m.width, 0.0);
  return m;
}

}  // namespace detail

/// |∂score/∂x| per pixel.
template <class T>
AttributionMap saliency(const Scorer<T>& scorer, const Tensor<T>& slices) {
  detail::check_batch_shape(slices.shape());
  auto map = detail::make_map<T>(Method::saliency, slices.shape());
  const auto g = detail::input_gradient(scorer, slices);
  for (std::size_t i = 0; i < g.size(); ++i) map.values[i] = std::abs(static_cast<double>(g[i]));
  map.update_range();
  return map;
}

/// Mean saliency over n copies of the input with N(0, (sigma·range)²) noise,
/// where range is the input's max minus min. Draws are fixed by `seed`.
template <class T>
AttributionMap smoothgrad(const Scorer<T>& scorer, const Tensor<T>& slices, const SmoothGradParams& params,
                          std::uint64_t seed) {
  params.validate();
  detail::check_batch_shape(slices.shape());
  auto map = detail::make_map<T>(Method::smoothgrad, slices.shape());
  const auto& xv = slices.vec();
  const auto [lo, hi] = std::minmax_element(xv.begin(), xv.end());
  const double stddev = params.sigma * static_cast<double>(*hi - *lo);
  Rng rng(seed);
  std::vector<T> noisy(xv.size());
  for (std::size_t k = 0; k < params.n; ++k) {
    for (std::size_t i = 0; i < xv.size(); ++i) {
      noisy[i] = stddev > 0.0 ? static_cast<T>(xv[i] + rng.normal(0.0, stddev)) : xv[i];
    }
    const auto g = detail::input_gradient(scorer, Tensor<T>::from(slices.shape(), noisy));
    for (std::size_t i = 0; i < g.size(); ++i) map.values[i] += std::abs(static_cast<double>(g[i]));
  }
  for (auto& v : map.values) v /= static_cast<double>(params.n);
  map.update_range();
  return map;
}

/// |guided gradient|: rectifiers additionally drop negative upstream
/// gradients, for this backward pass only. The model is not modified.
template <class T>
AttributionMap guided_backprop(const Scorer<T>& scorer, const Tensor<T>& slices) {
  detail::check_batch_shape(slices.shape());
  std::vector<T> g;
  {
    GuidedGradientScope guided;
    g = detail::input_gradient(scorer, slices);
  }
  auto map = detail::make_map<T>(Method::guided_backprop, slices.shape());
  for (std::size_t i = 0; i < g.size(); ++i) map.values[i] = std::abs(static_cast<double>(g[i]));
  map.update_range();
  return map;
}

/// rectify(Σ_k α_k A_k) per slice with α_k the spatial mean of ∂score/∂A_k,
/// bilinearly upsampled (align corners) to height × width.
template <class T>
AttributionMap gradcam_from_record(const TapRecord<T>& rec, std::size_t height, std::size_t width) {
  const auto& shape = rec.activations.shape();
  if (shape.size() != 4) throw std::invalid_argument("gradcam: tap '" + rec.layer_name + "' is not a feature map");
  const std::size_t S = shape[0], K = shape[1], h = shape[2], w = shape[3], hw = h * w;
  const auto& A = rec.activations.vec();
  const auto& G = rec.upstream_grad.vec();
  AttributionMap map;
  map.method = Method::gradcam;
  map.slices = S;
  map.height = height;
  map.width = width;
  map.coarse_height = h;
  map.coarse_width = w;
  map.coarse.assign(S * hw, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    double* cam = map.coarse.data() + s * hw;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t base = (s * K + k) * hw;
      double alpha = 0.0;
      for (std::size_t i = 0; i < hw; ++i) alpha += static_cast<double>(G[base + i]);
      alpha /= static_cast<double>(hw);
      for (std::size_t i = 0; i < hw; ++i) cam[i] += alpha * static_cast<double>(A[base + i]);
    }
    for (std::size_t i = 0; i < hw; ++i) cam[i] = std::max(cam[i], 0.0);
  }
  NoGradGuard no_grad;
  map.values = resize_bilinear(Tensor<double>::from({S, 1, h, w}, map.coarse), height, width).vec();
  map.update_range();
  return map;
}

/// Grad-CAM at an attached tap. The scorer must run the model's forward pass.
template <class T>
AttributionMap gradcam(const Scorer<T>& scorer, const TapHandle<T>& tap, const Tensor<T>& slices) {
  detail::check_batch_shape(slices.shape());
  auto score = scorer(slices);
  if (score.numel() != 1) throw std::invalid_argument("attribution target must be a scalar");
  if (score.requires_grad()) backward(score);
  return gradcam_from_record(tap.record(), slices.dim(2), slices.dim(3));
}

/// Elementwise product of Grad-CAM and guided backpropagation.
inline AttributionMap combine_guided_gradcam(const AttributionMap& cam, const AttributionMap& guided) {
  if (cam.values.size() != guided.values.size()) throw std::invalid_argument("guided_gradcam: map extents differ");
  AttributionMap out = cam;
  out.method = Method::guided_gradcam;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = cam.values[i] * guided.values[i];
  out.update_range();
  return out;
}

// ---- model-level entry points ---------------------------------------------

template <class T>
AttributionMap saliency(Model<T>& model, const Tensor<T>& slices, Target target) {
  return saliency(model_scorer(model, target), slices);
}

template <class T>
AttributionMap smoothgrad(Model<T>& model, const Tensor<T>& slices, Target target, const SmoothGradParams& params,
                          std::uint64_t seed) {
  return smoothgrad(model_scorer(model, target), slices, params, seed);
}

template <class T>
AttributionMap guided_backprop(Model<T>& model, const Tensor<T>& slices, Target target) {
  return guided_backprop(model_scorer(model, target), slices);
}

/// Grad-CAM at `layer` (the model's default tap when empty).
template <class T>
AttributionMap gradcam(Model<T>& model, const Tensor<T>& slices, Target target, const std::string& layer = {}) {
  const std::string name = layer.empty() ? model.default_tap() : layer;
  auto tap = model.taps().attach(name);
  return gradcam(model_scorer(model, target, name), tap, slices);
}

template <class T>
AttributionMap guided_gradcam(Model<T>& model, const Tensor<T>& slices, Target target, const std::string& layer = {}) {
  return combine_guided_gradcam(gradcam(model, slices, target, layer), guided_backprop(model, slices, target));
}

/// Dispatch by method name; smoothgrad uses `params` and `seed`.
template <class T>
AttributionMap attribute(Model<T>& model, const Tensor<T>& slices, Method method, Target target,
                         const SmoothGradParams& params = {}, std::uint64_t seed = 0, const std::string& layer = {}) {
  switch (method) {
    case Method::saliency: return saliency(model, slices, target);
    case Method::smoothgrad: return smoothgrad(model, slices, target, params, seed);
    case Method::guided_backprop: return guided_backprop(model, slices, target);
    case Method::gradcam: return gradcam(model, slices, target, layer);
    case Method::guided_gradcam: return guided_gradcam(model, slices, target, layer);
  }
  throw std::logic_error("attribute: unknown method");
}

}  // namespace roixai
