#pragma once

// Per-volume rigid augmentation. Forward order: rotate about the slice
// center, shift, then flip horizontally. Pixels are produced by inverse
// mapping; samples that fall outside the frame read as 0.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "roixai/core/random.hpp"
#include "roixai/data/volume.hpp"

namespace roixai {

struct AugmentParams {
  double max_rotation_deg = 25.0;
  double max_shift_px = 25.0;  // at a 256-pixel frame; scaled by width / 256
  double flip_probability = 0.5;

  static constexpr double kReferenceEdge = 256.0;

  void validate() const {
    if (!(max_rotation_deg >= 0.0)) throw std::invalid_argument("augment: max_rotation_deg must be >= 0");
    if (!(max_shift_px >= 0.0)) throw std::invalid_argument("augment: max_shift_px must be >= 0");
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
      throw std::invalid_argument("augment: flip_probability must lie in [0, 1]");
    }
  }

  double shift_limit(std::size_t width) const { return max_shift_px * static_cast<double>(width) / kReferenceEdge; }
};

struct RigidTransform {
  double rotation_deg = 0.0;
  double shift_x = 0.0, shift_y = 0.0;  // pixels
  bool flip = false;
};

inline RigidTransform draw_transform(const AugmentParams& p, std::size_t width, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  const double lim = p.shift_limit(width);
  RigidTransform t;
  t.rotation_deg = rng.uniform(-p.max_rotation_deg, p.max_rotation_deg);
  t.shift_x = rng.uniform(-lim, lim);
  t.shift_y = rng.uniform(-lim, lim);
  t.flip = rng.bernoulli(p.flip_probability);
  return t;
}

inline Volume apply_transform(const Volume& v, const RigidTransform& t) {
  v.validate();
  const std::size_t H = v.height, W = v.width;
  const double cx = 0.5 * static_cast<double>(W - 1), cy = 0.5 * static_cast<double>(H - 1);
  const double a = t.rotation_deg * std::numbers::pi / 180.0, c = std::cos(a), s = std::sin(a);
  const bool identity_geometry = t.rotation_deg == 0.0 && t.shift_x == 0.0 && t.shift_y == 0.0;

  Volume out = v;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      // Undo the flip, then the shift, then the rotation.
      const double ux = t.flip ? static_cast<double>(W - 1 - x) : static_cast<double>(x);
      const double dx = ux - t.shift_x - cx, dy = static_cast<double>(y) - t.shift_y - cy;
      double sx = c * dx + s * dy + cx, sy = -s * dx + c * dy + cy;
      if (identity_geometry) sx = ux, sy = static_cast<double>(y);

      const double fx = std::floor(sx), fy = std::floor(sy);
      const double wx = sx - fx, wy = sy - fy;
      const auto x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      const auto inside = [&](long xx, long yy) {
        return xx >= 0 && yy >= 0 && xx < static_cast<long>(W) && yy < static_cast<long>(H);
      };
      const long nx = std::lround(sx), ny = std::lround(sy);
      for (std::size_t k = 0; k < v.slices; ++k) {
        const float* src = v.data.data() + k * H * W;
        const auto px = [&](long xx, long yy) -> double {
          return inside(xx, yy) ? static_cast<double>(src[static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)]) : 0.0;
        };
        double val = (1 - wy) * ((1 - wx) * px(x0, y0) + wx * px(x0 + 1, y0)) +
                     wy * ((1 - wx) * px(x0, y0 + 1) + wx * px(x0 + 1, y0 + 1));
        out.data[(k * H + y) * W + x] = static_cast<float>(std::clamp(val, 0.0, 1.0));
        if (v.has_mask()) {
          out.roi_mask[(k * H + y) * W + x] =
              inside(nx, ny) ? v.roi_mask[k * H * W + static_cast<std::size_t>(ny) * W + static_cast<std::size_t>(nx)] : 0;
        }
      }
    }
  return out;
}

/// One transform drawn from `seed`, applied identically to every slice and the mask.
inline Volume augment(const Volume& v, const AugmentParams& p, std::uint64_t seed) {
  return apply_transform(v, draw_transform(p, v.width, seed));
}

}  // namespace roixai
