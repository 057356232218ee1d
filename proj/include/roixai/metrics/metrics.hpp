#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace roixai {

namespace detail {
inline void check_labels(std::span<const int> labels) {
  for (int l : labels)
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1, got " + std::to_string(l));
}
}  // namespace detail

/// Mann-Whitney AUC: P(s+ > s-) + ½ P(s+ = s-) over positive-negative pairs.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: scores and labels differ in length");
  detail::check_labels(labels);
  for (double s : scores)
    if (std::isnan(s)) throw std::invalid_argument("roc_auc: NaN score");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw std::invalid_argument("roc_auc: undefined without both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney U, kept integral: each tie group contributes
  // 2·(negatives below)·(positives in group) + (negatives in group)·(positives in group).
  std::uint64_t twice_u = 0, negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    twice_u += 2 * negatives_below * pos + neg * pos;
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

/// Fraction of samples where (score >= threshold) equals the label.
inline double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) throw std::invalid_argument("accuracy: scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("accuracy: empty input");
  detail::check_labels(labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += static_cast<int>(scores[i] >= threshold) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

/// 10·log10(peak² / MSE); identical inputs give +infinity.
inline double psnr(std::span<const double> reference, std::span<const double> test, double peak = 1.0) {
  if (reference.size() != test.size()) throw std::invalid_argument("psnr: extents differ");
  if (reference.empty()) throw std::invalid_argument("psnr: empty input");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - test[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / (se / static_cast<double>(reference.size())));
}

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;

  double c1() const { return (0.01 * dynamic_range) * (0.01 * dynamic_range); }
  double c2() const { return (0.03 * dynamic_range) * (0.03 * dynamic_range); }

  void validate() const {
    if (window == 0 || window % 2 == 0) throw std::invalid_argument("ssim: window size must be odd");
    if (!(sigma > 0.0)) throw std::invalid_argument("ssim: window width must be positive");
    if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");
  }

  /// Normalized 1-D Gaussian; the 2-D window is its outer product.
  std::vector<double> kernel() const {
    std::vector<double> k(window);
    const double c = static_cast<double>(window / 2);
    for (std::size_t i = 0; i < window; ++i) {
      const double d = static_cast<double>(i) - c;
      k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    const double s = std::accumulate(k.begin(), k.end(), 0.0);
    for (auto& v : k) v /= s;
    return k;
  }
};

namespace detail {
// Valid-mode separable filtering of an H×W image.
inline std::vector<double> filter_valid(std::span<const double> img, std::size_t H, std::size_t W,
                                        const std::vector<double>& k) {
  const std::size_t n = k.size(), Ho = H - n + 1, Wo = W - n + 1;
  std::vector<double> rows(H * Wo, 0.0), out(Ho * Wo, 0.0);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < Wo; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * img[y * W + x + i];
      rows[y * Wo + x] = acc;
    }
  for (std::size_t y = 0; y < Ho; ++y)
    for (std::size_t x = 0; x < Wo; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * rows[(y + i) * Wo + x];
      out[y * Wo + x] = acc;
    }
  return out;
}
}  // namespace detail

/// Mean SSIM over all fully contained Gaussian windows of an H×W pair.
inline double ssim(std::span<const double> reference, std::span<const double> test, std::size_t H, std::size_t W,
                   const SsimParams& params = {}) {
  params.validate();
  if (reference.size() != H * W || test.size() != H * W) throw std::invalid_argument("ssim: extents differ");
  if (H < params.window || W < params.window) {
    throw std::invalid_argument("ssim: image " + std::to_string(H) + "x" + std::to_string(W) + " is smaller than the " +
                                std::to_string(params.window) + "x" + std::to_string(params.window) + " window");
  }
  const auto k = params.kernel();
  std::vector<double> xx(H * W), yy(H * W), xy(H * W);
  for (std::size_t i = 0; i < H * W; ++i) {
    xx[i] = reference[i] * reference[i];
    yy[i] = test[i] * test[i];
    xy[i] = reference[i] * test[i];
  }
  const auto mx = detail::filter_valid(reference, H, W, k), my = detail::filter_valid(test, H, W, k);
  const auto sxx = detail::filter_valid(xx, H, W, k), syy = detail::filter_valid(yy, H, W, k),
             sxy = detail::filter_valid(xy, H, W, k);
  const double c1 = params.c1(), c2 = params.c2();
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

/// Per-slice SSIM averaged over a stack of `slices` H×W images.
inline double ssim_stack(std::span<const double> reference, std::span<const double> test, std::size_t slices,
                         std::size_t H, std::size_t W, const SsimParams& params = {}) {
  if (slices == 0) throw std::invalid_argument("ssim: empty stack");
  if (reference.size() != slices * H * W || test.size() != slices * H * W) throw std::invalid_argument("ssim: extents differ");
  double total = 0.0;
  for (std::size_t s = 0; s < slices; ++s) {
    total += ssim(reference.subspan(s * H * W, H * W), test.subspan(s * H * W, H * W), H, W, params);
  }
  return total / static_cast<double>(slices);
}

/// Evaluation summary; fields that do not apply to a model stay empty.
struct MetricsReport {
  std::optional<double> auc;
  std::optional<double> accuracy;
  std::optional<double> psnr_db;  // +infinity marks exact reconstruction
  std::optional<double> ssim;
  std::optional<double> localization_energy;
  std::size_t n_samples = 0;

  void validate() const {
    for (const auto& v : {auc, accuracy, ssim, localization_energy})
      if (v && !std::isfinite(*v)) throw std::invalid_argument("metrics report: non-finite value");
    if (psnr_db && (std::isnan(*psnr_db) || *psnr_db == -std::numeric_limits<double>::infinity())) {
      throw std::invalid_argument("metrics report: invalid psnr");
    }
    if ((auc || accuracy) && n_samples == 0) throw std::invalid_argument("metrics report: classification fields need samples");
  }
};

/// Fixed rendering used in reports: "inf" for the infinite PSNR marker.
inline std::string format_metric(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace roixai
