#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "roixai/attribution/attribution.hpp"
#include "roixai/attribution/png.hpp"
#include "roixai/harness/checkpoint.hpp"
#include "roixai/harness/report.hpp"
#include "roixai/harness/train.hpp"

namespace roixai {

struct AttributeOptions {
  Method method = Method::gradcam;
  std::optional<Target> target;  // default: the model's default target
  SmoothGradParams smoothgrad;
  std::uint64_t seed = 0;
  std::string layer;  // Grad-CAM tap; default per architecture
  Normalization normalization = Normalization::per_slice;
  double alpha = 0.4;
};

struct AttributeOutput {
  AttributionMap map;
  std::vector<std::filesystem::path> overlays, maps;
  std::filesystem::path index;
};

inline std::string slice_stem(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slice_%03zu", s);
  return buf;
}

/// Writes, per slice, an overlay PNG and the raw map as a float64 (H, W)
/// container, plus index.json listing them in slice order.
inline AttributeOutput attribute_volume(Model<float>& model, const Volume& input, const AttributeOptions& opt,
                                        const std::filesystem::path& out_dir) {
  const Volume v = resize_volume(input, model.spec().input_edge);
  const Target target = opt.target.value_or(default_target(model));
  AttributeOutput out;
  out.map = attribute(model, v.batch<float>(), opt.method, target, opt.smoothgrad, opt.seed, opt.layer);
  std::filesystem::create_directories(out_dir);
  Json slices = Json::array();
  for (std::size_t s = 0; s < v.slices; ++s) {
    const auto stem = slice_stem(s);
    const auto image = std::span<const float>(v.data).subspan(s * v.slice_size(), v.slice_size());
    out.overlays.push_back(out_dir / (stem + ".png"));
    out.maps.push_back(out_dir / (stem + ".npy"));
    write_png(out.overlays.back().string(), overlay(out.map, image, s, opt.normalization, opt.alpha));
    const auto values = out.map.slice(s);
    write_npy(out.maps.back().string(), NpyArray::from<double>({v.height, v.width}, values));
    slices.push_back({{"slice", s}, {"overlay", stem + ".png"}, {"map", stem + ".npy"}});
  }
  const Json index = {{"patient_id", v.patient_id},
                      {"method", to_string(opt.method)},
                      {"target", to_string(target)},
                      {"height", v.height},
                      {"width", v.width},
                      {"value_range", {out.map.value_range.first, out.map.value_range.second}},
                      {"slices", slices}};
  out.index = out_dir / "index.json";
  write_text_file(out.index, index.dump(2) + "\n");
  return out;
}

/// One overlay tile per run for the same slice of `volume`, left to right in
/// report order. Runs without a final checkpoint, or whose model cannot take
/// the chosen method, are skipped; returns the labels of the tiles drawn.
inline std::vector<std::string> render_comparison(const std::vector<RunRecord>& runs, const Volume& volume, Method method,
                                                  std::optional<std::size_t> slice, const std::filesystem::path& png) {
  std::vector<Raster> tiles;
  std::vector<std::string> labels;
  for (const auto& r : report_order(runs)) {
    const auto ckpt = r.location / kFinalCheckpoint;
    if (r.status != "ok" || !std::filesystem::exists(ckpt)) continue;
    auto model = load_model(ckpt);
    const Volume v = resize_volume(volume, model->spec().input_edge);
    const std::size_t s = slice.value_or(v.slices / 2);
    if (s >= v.slices) throw std::invalid_argument("comparison slice " + std::to_string(s) + " is out of range");
    AttributionMap map;
    try {
      map = attribute(*model, v.batch<float>(), method, default_target(*model));
    } catch (const std::invalid_argument&) {
      continue;
    }
    const auto image = std::span<const float>(v.data).subspan(s * v.slice_size(), v.slice_size());
    tiles.push_back(overlay(map, image, s));
    labels.push_back(r.config.label());
  }
  if (!tiles.empty()) write_png(png.string(), hstack(tiles));
  return labels;
}

}  // namespace roixai
