#pragma once

// 8-bit RGB PNG encoding: one IHDR, one zlib IDAT with filter type 0 on
// every row, IEND. Output bytes depend only on the raster.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/attribution/overlay.hpp"

namespace roixai {

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Raster& r) {
  if (r.width == 0 || r.height == 0 || r.rgb.size() != r.width * r.height * 3) {
    throw std::invalid_argument("encode_png: raster extent does not match its pixel buffer");
  }
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> ihdr;
  detail::put_u32(ihdr, static_cast<std::uint32_t>(r.width));
  detail::put_u32(ihdr, static_cast<std::uint32_t>(r.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // bit depth 8, truecolour, deflate, adaptive filtering, no interlace
  detail::png_chunk(out, "IHDR", ihdr);

  const std::size_t stride = r.width * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * r.height);
  for (std::size_t y = 0; y < r.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), r.rgb.begin() + static_cast<std::ptrdiff_t>(y * stride),
               r.rgb.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION) != Z_OK) {
    throw std::runtime_error("encode_png: deflate failed");
  }
  packed.resize(packed_size);
  detail::png_chunk(out, "IDAT", packed);
  detail::png_chunk(out, "IEND", {});
  return out;
}

inline void write_png(const std::string& path, const Raster& r) {
  const auto bytes = encode_png(r);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

/// Tiles side by side, top-aligned, with `gap` black columns between them;
/// shorter tiles are padded with black below.
inline Raster hstack(const std::vector<Raster>& tiles, std::size_t gap = 2) {
  if (tiles.empty()) throw std::invalid_argument("hstack: no tiles");
  Raster out;
  for (const auto& t : tiles) {
    out.height = std::max(out.height, t.height);
    out.width += t.width;
  }
  out.width += gap * (tiles.size() - 1);
  out.rgb.assign(out.width * out.height * 3, 0);
  std::size_t x0 = 0;
  for (const auto& t : tiles) {
    for (std::size_t y = 0; y < t.height; ++y)
      std::copy_n(t.rgb.begin() + static_cast<std::ptrdiff_t>(y * t.width * 3), t.width * 3,
                  out.rgb.begin() + static_cast<std::ptrdiff_t>((y * out.width + x0) * 3));
    x0 += t.width + gap;
  }
  return out;
}

}  // namespace roixai
