#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/tensor.hpp"

namespace roixai {

enum class Plane { sagittal };

/// One patient's sagittal stack, s × H × W intensities in [0, 1].
struct Volume {
  std::string patient_id;
  Plane plane = Plane::sagittal;
  std::size_t slices = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;
  std::optional<int> label;
  std::vector<std::uint8_t> roi_mask;  // s × H × W, empty when absent

  std::size_t slice_size() const { return height * width; }
  float at(std::size_t s, std::size_t y, std::size_t x) const { return data[(s * height + y) * width + x]; }
  bool has_mask() const { return !roi_mask.empty(); }

  void validate() const {
    if (slices == 0 || height == 0 || width == 0) throw std::invalid_argument("volume '" + patient_id + "' is empty");
    if (data.size() != slices * height * width) throw std::invalid_argument("volume '" + patient_id + "': data size mismatch");
    if (!roi_mask.empty() && roi_mask.size() != data.size()) {
      throw std::invalid_argument("volume '" + patient_id + "': mask size mismatch");
    }
    for (float v : data)
      if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("volume '" + patient_id + "': intensity outside [0, 1]");
    for (auto m : roi_mask)
      if (m > 1) throw std::invalid_argument("volume '" + patient_id + "': mask must be binary");
    if (label && *label != 0 && *label != 1) throw std::invalid_argument("volume '" + patient_id + "': label must be 0 or 1");
  }

  /// Slice batch [s, 1, H, W].
  template <class T = float>
  Tensor<T> batch() const {
    validate();
    return Tensor<T>::from({slices, 1, height, width}, std::vector<T>(data.begin(), data.end()));
  }
};

}  // namespace roixai
