#pragma once

// Synthetic sagittal knee stand-ins: soft tissue, femur and tibia ellipses, two
// dark wedge-shaped menisci at the joint line and, for positive cases, a
// bright disc-shaped tear inside one meniscus over a contiguous slice run.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "roixai/core/random.hpp"
#include "roixai/data/volume.hpp"

namespace roixai {

struct PhantomParams {
  std::size_t edge = 64;
  std::size_t s_min = 6, s_max = 10;
  double lesion_probability = 0.35;
  double lesion_radius_min = 3.0, lesion_radius_max = 5.0;  // pixels
  double noise_level = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (edge == 0 || edge % 16 != 0) throw std::invalid_argument("phantom: edge must be a positive multiple of 16");
    if (s_min == 0 || s_min > s_max) throw std::invalid_argument("phantom: need 1 <= s_min <= s_max");
    if (!(lesion_probability >= 0.0 && lesion_probability <= 1.0)) {
      throw std::invalid_argument("phantom: lesion_probability must lie in [0, 1]");
    }
    if (!(lesion_radius_min >= 2.0 && lesion_radius_min <= lesion_radius_max)) {
      throw std::invalid_argument("phantom: lesion radius range must satisfy 2 <= min <= max");
    }
    if (!(noise_level >= 0.0)) throw std::invalid_argument("phantom: noise_level must be >= 0");
  }
};

namespace detail {

struct Ellipse {
  double cx, cy, rx, ry;
  bool contains(double x, double y) const {
    const double u = (x - cx) / rx, v = (y - cy) / ry;
    return u * u + v * v <= 1.0;
  }
};

// Triangle with its base on the outer side of the joint, tapering inward.
struct Wedge {
  double tip_x, base_x, cy, half_height;
  bool contains(double x, double y) const {
    const double t = (x - tip_x) / (base_x - tip_x);  // 0 at the tip, 1 at the base
    if (t < 0.0 || t > 1.0) return false;
    return std::abs(y - cy) <= half_height * t;
  }
};

}  // namespace detail

/// Volume `index` of the phantom family; a pure function of (params.seed, index).
inline Volume generate_phantom(const PhantomParams& p, std::uint64_t index) {
  p.validate();
  Rng rng(derive_seed(p.seed, index));
  const bool positive = rng.uniform() < p.lesion_probability;
  const std::size_t S = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(p.s_min),
                                                                  static_cast<std::int64_t>(p.s_max)));
  const double E = static_cast<double>(p.edge);

  // Per-patient anatomy jitter, in units of the edge.
  const double joint_y = E * (0.5 + rng.uniform(-0.04, 0.04));
  const double center_x = E * (0.5 + rng.uniform(-0.04, 0.04));
  const double bone_rx = E * rng.uniform(0.24, 0.3);
  const double femur_ry = E * rng.uniform(0.2, 0.26), tibia_ry = E * rng.uniform(0.18, 0.24);
  const double gap = E * rng.uniform(0.035, 0.05);
  const double femur_level = rng.uniform(0.62, 0.72), tibia_level = rng.uniform(0.55, 0.65);
  const double tissue_level = rng.uniform(0.3, 0.4), meniscus_level = rng.uniform(0.08, 0.14);
  const double wedge_len = E * rng.uniform(0.16, 0.2), wedge_half = E * rng.uniform(0.03, 0.04);

  // Lesion: which horn, where along it, radius, and the slice run.
  const int horn = rng.uniform() < 0.5 ? 0 : 1;
  const double lesion_t = rng.uniform(0.45, 0.8);
  const double lesion_r = rng.uniform(p.lesion_radius_min, p.lesion_radius_max);
  const double lesion_dy = rng.uniform(-0.3, 0.3) * wedge_half * lesion_t;
  const std::size_t run = std::max<std::size_t>(1, static_cast<std::size_t>(rng.uniform_int(
                                                       static_cast<std::int64_t>(std::max<std::size_t>(1, S / 4)),
                                                       static_cast<std::int64_t>(std::max<std::size_t>(1, S / 2)))));
  const std::size_t run_start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(S - run)));

  Volume v;
  v.patient_id = "phantom-" + std::to_string(p.seed) + "-" + std::to_string(index);
  v.slices = S;
  v.height = v.width = p.edge;
  v.data.assign(S * p.edge * p.edge, 0.0f);
  v.label = positive ? 1 : 0;
  if (positive) v.roi_mask.assign(v.data.size(), 0);

  for (std::size_t s = 0; s < S; ++s) {
    // Structures shrink toward the lateral and medial ends of the stack.
    const double t = S > 1 ? 2.0 * static_cast<double>(s) / static_cast<double>(S - 1) - 1.0 : 0.0;
    const double scale = std::sqrt(1.0 - 0.35 * t * t);
    const detail::Ellipse tissue{center_x, joint_y, E * 0.44 * scale, E * 0.47};
    const detail::Ellipse femur{center_x, joint_y - gap - femur_ry * scale, bone_rx * scale, femur_ry * scale};
    const detail::Ellipse tibia{center_x, joint_y + gap + tibia_ry * scale, bone_rx * scale * 1.05, tibia_ry * scale};
    const double reach = bone_rx * scale;
    const detail::Wedge horns[2] = {
        {center_x - reach + wedge_len * scale, center_x - reach - 0.15 * wedge_len, joint_y, wedge_half},
        {center_x + reach - wedge_len * scale, center_x + reach + 0.15 * wedge_len, joint_y, wedge_half},
    };
    const auto& h = horns[horn];
    const double lx = h.tip_x + lesion_t * (h.base_x - h.tip_x), ly = joint_y + lesion_dy;
    const bool lesion_here = positive && s >= run_start && s < run_start + run;

    for (std::size_t y = 0; y < p.edge; ++y)
      for (std::size_t x = 0; x < p.edge; ++x) {
        const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
        double val = 0.0;
        if (tissue.contains(px, py)) val = tissue_level;
        if (femur.contains(px, py)) val = femur_level;
        if (tibia.contains(px, py)) val = tibia_level;
        if (horns[0].contains(px, py) || horns[1].contains(px, py)) val = meniscus_level;
        const std::size_t i = (s * p.edge + y) * p.edge + x;
        if (lesion_here && std::hypot(px - lx, py - ly) <= lesion_r) {
          val = 0.95;
          v.roi_mask[i] = 1;
        }
        if (val > 0.0) val += p.noise_level * rng.normal();
        v.data[i] = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
  }
  return v;
}

}  // namespace roixai
