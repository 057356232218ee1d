#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace roixai {

/// Share of attribution mass inside the mask: Σ map[mask] / Σ map. Maps with
/// negative entries are first shifted by their minimum. An all-zero map
/// scores the mask's area fraction.
inline double localization_energy(std::span<const double> map, std::span<const std::uint8_t> mask) {
  if (map.size() != mask.size()) throw std::invalid_argument("localization_energy: map and mask extents differ");
  const std::size_t area = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  if (area == 0) throw std::invalid_argument("localization_energy: empty mask");
  const double lo = map.empty() ? 0.0 : *std::min_element(map.begin(), map.end());
  const double shift = lo < 0.0 ? lo : 0.0;
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double v = map[i] - shift;
    total += v;
    if (mask[i]) inside += v;
  }
  if (!(total > 0.0)) return static_cast<double>(area) / static_cast<double>(mask.size());
  return std::clamp(inside / total, 0.0, 1.0);
}

}  // namespace roixai
