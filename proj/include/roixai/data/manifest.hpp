#pragma once

// Dataset manifest: UTF-8 CSV with a header row naming patient_id, path and
// label, plus an optional mask column. Relative paths resolve against the
// manifest's directory. An empty label cell means unlabeled.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/data/npy.hpp"
#include "roixai/data/volume.hpp"

namespace roixai {

struct ManifestEntry {
  std::string patient_id;
  std::filesystem::path path;
  std::optional<int> label;
  std::filesystem::path mask_path;  // empty when absent
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') cells.back() += '"', ++i;
      else if (ch == '"') quoted = false;
      else cells.back() += ch;
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.emplace_back();
    } else {
      cells.back() += ch;
    }
  }
  if (quoted) throw ManifestError("manifest: unterminated quote");
  return cells;
}

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

}  // namespace detail

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ManifestError("cannot open manifest '" + file.string() + "'");
  const auto base = file.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw ManifestError("manifest '" + file.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  const auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = col("patient_id"), path_col = col("path"), label_col = col("label"), mask_col = col("mask");
  if (!id_col || !path_col || !label_col) throw ManifestError("manifest: header must name patient_id, path and label");
  for (const auto& h : header)
    if (h != "patient_id" && h != "path" && h != "label" && h != "mask") throw ManifestError("manifest: unknown column '" + h + "'");

  std::vector<ManifestEntry> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const auto where = "manifest line " + std::to_string(line_no) + ": ";
    if (cells.size() != header.size()) throw ManifestError(where + "expected " + std::to_string(header.size()) + " cells");
    ManifestEntry e;
    e.patient_id = cells[*id_col];
    if (e.patient_id.empty()) throw ManifestError(where + "empty patient_id");
    e.path = cells[*path_col];
    if (e.path.empty()) throw ManifestError(where + "empty path");
    if (e.path.is_relative()) e.path = base / e.path;
    const auto& lab = cells[*label_col];
    if (lab == "0" || lab == "1") e.label = lab == "1";
    else if (!lab.empty()) throw ManifestError(where + "label must be 0, 1 or empty, got '" + lab + "'");
    if (mask_col && !cells[*mask_col].empty()) {
      e.mask_path = cells[*mask_col];
      if (e.mask_path.is_relative()) e.mask_path = base / e.mask_path;
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw ManifestError("manifest '" + file.string() + "' lists no volumes");
  return out;
}

/// Writes paths as given; callers pass paths relative to the manifest's directory.
inline void write_manifest(const std::filesystem::path& file, const std::vector<ManifestEntry>& entries) {
  const bool masks = std::any_of(entries.begin(), entries.end(), [](const auto& e) { return !e.mask_path.empty(); });
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + file.string() + "' for writing");
  out << "patient_id,path,label" << (masks ? ",mask" : "") << '\n';
  for (const auto& e : entries) {
    out << detail::csv_cell(e.patient_id) << ',' << detail::csv_cell(e.path.generic_string()) << ','
        << (e.label ? std::to_string(*e.label) : "");
    if (masks) out << ',' << detail::csv_cell(e.mask_path.generic_string());
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + file.string() + "' failed");
}

enum class IntensityScaling { min_max, none };

/// Bilinear resize of every slice to edge × edge (align-corners sampling, no
/// pre-filtering); masks use nearest neighbours.
inline Volume resize_volume(const Volume& v, std::size_t edge) {
  if (edge == 0) throw std::invalid_argument("resize_volume: edge must be positive");
  if (v.height == edge && v.width == edge) return v;
  Volume out = v;
  out.height = out.width = edge;
  out.data.assign(v.slices * edge * edge, 0.0f);
  if (v.has_mask()) out.roi_mask.assign(out.data.size(), 0);
  const auto coord = [edge](std::size_t i, std::size_t n) {
    return edge == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(edge - 1);
  };
  for (std::size_t s = 0; s < v.slices; ++s)
    for (std::size_t y = 0; y < edge; ++y)
      for (std::size_t x = 0; x < edge; ++x) {
        const double sy = coord(y, v.height), sx = coord(x, v.width);
        const auto y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
        const std::size_t y1 = std::min(y0 + 1, v.height - 1), x1 = std::min(x0 + 1, v.width - 1);
        const double wy = sy - static_cast<double>(y0), wx = sx - static_cast<double>(x0);
        const double val = (1 - wy) * ((1 - wx) * v.at(s, y0, x0) + wx * v.at(s, y0, x1)) +
                           wy * ((1 - wx) * v.at(s, y1, x0) + wx * v.at(s, y1, x1));
        const std::size_t o = (s * edge + y) * edge + x;
        out.data[o] = static_cast<float>(std::clamp(val, 0.0, 1.0));
        if (v.has_mask()) {
          const auto ny = static_cast<std::size_t>(std::lround(sy)), nx = static_cast<std::size_t>(std::lround(sx));
          out.roi_mask[o] = v.roi_mask[(s * v.height + ny) * v.width + nx];
        }
      }
  return out;
}

/// Reads an (s, H, W) container. Min-max normalization maps the volume's
/// range onto [0, 1]; a constant volume becomes all zeros.
inline Volume load_volume_file(const std::filesystem::path& path, IntensityScaling norm = IntensityScaling::min_max) {
  const auto a = read_npy(path.string());
  if (a.shape.size() != 3 || shape_numel(a.shape) == 0) {
    throw std::runtime_error("'" + path.string() + "': expected a nonempty (s, H, W) array, got shape " +
                             detail::python_shape(a.shape));
  }
  const auto raw = a.as_double();
  Volume v;
  v.patient_id = path.stem().string();
  v.slices = a.shape[0];
  v.height = a.shape[1];
  v.width = a.shape[2];
  v.data.resize(raw.size());
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::runtime_error("'" + path.string() + "': non-finite intensities");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double x = norm == IntensityScaling::min_max ? (hi > lo ? (raw[i] - lo) / (hi - lo) : 0.0) : raw[i];
    if (norm == IntensityScaling::none && !(x >= 0.0 && x <= 1.0)) {
      throw std::runtime_error("'" + path.string() + "': intensities outside [0, 1] need min-max normalization");
    }
    v.data[i] = static_cast<float>(x);
  }
  return v;
}

inline Volume load_entry(const ManifestEntry& e, IntensityScaling norm = IntensityScaling::min_max) {
  Volume v = load_volume_file(e.path, norm);
  v.patient_id = e.patient_id;
  v.label = e.label;
  if (!e.mask_path.empty()) {
    const auto m = read_npy(e.mask_path.string());
    if (m.dtype != DType::u1 || m.shape != Shape{v.slices, v.height, v.width}) {
      throw std::runtime_error("'" + e.mask_path.string() + "': mask must be uint8 with the volume's extent");
    }
    v.roi_mask = m.values<std::uint8_t>();
  }
  v.validate();
  return v;
}

/// Volume data as a float32 (s, H, W) container.
inline NpyArray volume_array(const Volume& v) {
  return NpyArray::from<float>({v.slices, v.height, v.width}, std::span<const float>(v.data));
}

inline NpyArray mask_array(const Volume& v) {
  return NpyArray::from<std::uint8_t>({v.slices, v.height, v.width}, std::span<const std::uint8_t>(v.roi_mask));
}

}  // namespace roixai
