#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "roixai/attribution/attribution.hpp"

namespace roixai {

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Raster {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;
};

enum class Normalization { per_slice, per_volume };

namespace detail {
// Viridis sampled at nine evenly spaced points.
inline constexpr std::array<std::array<double, 3>, 9> kViridis{{
    {0.267004, 0.004874, 0.329415},
    {0.282623, 0.140926, 0.457517},
    {0.229739, 0.322361, 0.545706},
    {0.172719, 0.448791, 0.557885},
    {0.127568, 0.566949, 0.550556},
    {0.157851, 0.683765, 0.501686},
    {0.369214, 0.788888, 0.382914},
    {0.678489, 0.863742, 0.189503},
    {0.993248, 0.906157, 0.143936},
}};
}  // namespace detail

inline std::array<double, 3> viridis(double t) {
  t = std::clamp(t, 0.0, 1.0) * static_cast<double>(detail::kViridis.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(t), detail::kViridis.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<double, 3> c{};
  for (int k = 0; k < 3; ++k) c[k] = detail::kViridis[i][k] * (1.0 - f) + detail::kViridis[i + 1][k] * f;
  return c;
}

/// Min-max normalization to [0, 1]; a constant input maps to zeros.
inline std::vector<double> normalize_unit(std::span<const double> v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

/// Grayscale base blended with the viridis color of each heat value. The
/// blend weight is alpha·heat, so zero heat leaves the base untouched.
inline Raster overlay(std::span<const double> heat, std::span<const float> image, std::size_t height, std::size_t width,
                      double alpha = 0.4) {
  if (heat.size() != height * width || image.size() != height * width) {
    throw std::invalid_argument("overlay: heat map and image must both be " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
  Raster r{width, height, std::vector<std::uint8_t>(height * width * 3)};
  for (std::size_t i = 0; i < heat.size(); ++i) {
    const double h = std::clamp(heat[i], 0.0, 1.0);
    const double gray = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    const auto color = viridis(h);
    const double w = alpha * h;
    for (int k = 0; k < 3; ++k) {
      const double v = (1.0 - w) * gray + w * color[k];
      r.rgb[i * 3 + k] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  return r;
}

/// Renders one slice of an attribution map over the matching image slice.
inline Raster overlay(const AttributionMap& map, std::span<const float> image_slice, std::size_t slice,
                      Normalization norm = Normalization::per_slice, double alpha = 0.4) {
  std::vector<double> heat;
  if (norm == Normalization::per_slice) {
    heat = normalize_unit(map.slice(slice));
  } else {
    const auto all = normalize_unit(map.values);
    heat.assign(all.begin() + static_cast<std::ptrdiff_t>(slice * map.slice_size()),
                all.begin() + static_cast<std::ptrdiff_t>((slice + 1) * map.slice_size()));
  }
  return overlay(heat, image_slice, map.height, map.width, alpha);
}

}  // namespace roixai
