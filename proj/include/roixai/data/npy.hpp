#pragma once

// NPY v1.0 container: magic "\x93NUMPY", version 1.0, little-endian u16
// header length, a Python-literal header dict padded with spaces to a 64-byte
// boundary and terminated by '\n', then the raw C-order payload. Headers are
// written exactly as numpy writes them, including the spare room it reserves
// after the dict for growing the leading axis.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "roixai/core/shape.hpp"

namespace roixai {

static_assert(std::endian::native == std::endian::little, "NPY payloads are written in host order");

enum class DType { f4, f8, u1 };

inline std::string_view dtype_descr(DType d) {
  switch (d) {
    case DType::f4: return "<f4";
    case DType::f8: return "<f8";
    case DType::u1: return "|u1";
  }
  return "?";
}

inline std::size_t dtype_size(DType d) { return d == DType::f8 ? 8 : d == DType::f4 ? 4 : 1; }

class NpyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NpyBadMagic : public NpyError {
 public:
  using NpyError::NpyError;
};
class NpyUnsupported : public NpyError {  // dtype, byte order, layout or version
 public:
  using NpyError::NpyError;
};
class NpyMalformedHeader : public NpyError {
 public:
  using NpyError::NpyError;
};
class NpyTruncated : public NpyError {
 public:
  using NpyError::NpyError;
};

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::f4;
  else if constexpr (std::is_same_v<T, double>) return DType::f8;
  else {
    static_assert(std::is_same_v<T, std::uint8_t>, "NPY element type must be float, double or uint8_t");
    return DType::u1;
  }
}

/// A C-order array with its raw little-endian payload.
struct NpyArray {
  DType dtype = DType::f4;
  Shape shape;
  std::vector<std::uint8_t> payload;

  std::size_t numel() const { return shape_numel(shape); }

  template <class T>
  static NpyArray from(Shape shape, std::span<const T> values) {
    if (values.size() != shape_numel(shape)) throw std::invalid_argument("NpyArray: value count does not match shape");
    NpyArray a{dtype_of<T>(), std::move(shape), std::vector<std::uint8_t>(values.size() * sizeof(T))};
    if (!values.empty()) std::memcpy(a.payload.data(), values.data(), a.payload.size());
    return a;
  }

  template <class T>
  std::vector<T> values() const {
    if (dtype_of<T>() != dtype) {
      throw std::invalid_argument("NpyArray: stored dtype is " + std::string(dtype_descr(dtype)));
    }
    std::vector<T> v(numel());
    if (!v.empty()) std::memcpy(v.data(), payload.data(), payload.size());
    return v;
  }

  /// Elements converted to double, whatever the stored dtype.
  std::vector<double> as_double() const {
    switch (dtype) {
      case DType::f4: { auto v = values<float>(); return {v.begin(), v.end()}; }
      case DType::f8: return values<double>();
      case DType::u1: { auto v = values<std::uint8_t>(); return {v.begin(), v.end()}; }
    }
    return {};
  }
};

namespace detail {

inline constexpr char kNpyMagic[] = "\x93NUMPY";
inline constexpr std::size_t kNpyAlign = 64;
inline constexpr std::size_t kNpyGrowthDigits = 21;

inline std::string python_shape(const Shape& shape) {
  if (shape.empty()) return "()";
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + (shape.size() == 1 ? ",)" : ")");
}

inline std::string npy_header(DType dtype, const Shape& shape) {
  std::string dict = "{'descr': '" + std::string(dtype_descr(dtype)) + "', 'fortran_order': False, 'shape': " +
                     python_shape(shape) + ", }";
  if (!shape.empty()) dict.append(kNpyGrowthDigits - std::to_string(shape[0]).size(), ' ');
  const std::size_t hlen = dict.size() + 1;
  const std::size_t pad = kNpyAlign - (6 + 2 + 2 + hlen) % kNpyAlign;
  dict.append(pad, ' ');
  dict += '\n';
  return dict;
}

inline void skip_space(std::string_view s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

// Parses the subset of Python literal syntax numpy emits for the header dict.
struct ParsedHeader {
  std::string descr;
  bool fortran = false;
  Shape shape;
  bool has_descr = false, has_order = false, has_shape = false;
};

inline ParsedHeader parse_npy_header(std::string_view h) {
  auto fail = [](const std::string& why) -> NpyMalformedHeader { return NpyMalformedHeader("npy header: " + why); };
  ParsedHeader out;
  std::size_t i = 0;
  skip_space(h, i);
  if (i >= h.size() || h[i] != '{') throw fail("expected '{'");
  ++i;
  for (;;) {
    skip_space(h, i);
    if (i < h.size() && h[i] == '}') break;
    if (i >= h.size() || (h[i] != '\'' && h[i] != '"')) throw fail("expected a quoted key");
    const char q = h[i++];
    const auto end = h.find(q, i);
    if (end == std::string_view::npos) throw fail("unterminated key");
    const std::string key(h.substr(i, end - i));
    i = end + 1;
    skip_space(h, i);
    if (i >= h.size() || h[i] != ':') throw fail("expected ':'");
    ++i;
    skip_space(h, i);
    if (key == "descr") {
      if (i >= h.size() || (h[i] != '\'' && h[i] != '"')) throw fail("descr must be a string");
      const char dq = h[i++];
      const auto e = h.find(dq, i);
      if (e == std::string_view::npos) throw fail("unterminated descr");
      out.descr = std::string(h.substr(i, e - i));
      out.has_descr = true;
      i = e + 1;
    } else if (key == "fortran_order") {
      if (h.substr(i, 4) == "True") out.fortran = true, i += 4;
      else if (h.substr(i, 5) == "False") out.fortran = false, i += 5;
      else throw fail("fortran_order must be True or False");
      out.has_order = true;
    } else if (key == "shape") {
      if (i >= h.size() || h[i] != '(') throw fail("shape must be a tuple");
      ++i;
      for (;;) {
        skip_space(h, i);
        if (i < h.size() && h[i] == ')') { ++i; break; }
        std::size_t v = 0, digits = 0;
        while (i < h.size() && h[i] >= '0' && h[i] <= '9') v = v * 10 + static_cast<std::size_t>(h[i++] - '0'), ++digits;
        if (digits == 0) throw fail("bad shape entry");
        out.shape.push_back(v);
        skip_space(h, i);
        if (i < h.size() && h[i] == ',') ++i;
        else if (i < h.size() && h[i] == ')') { ++i; break; }
        else throw fail("bad shape tuple");
      }
      out.has_shape = true;
    } else {
      throw fail("unexpected key '" + key + "'");
    }
    skip_space(h, i);
    if (i < h.size() && h[i] == ',') { ++i; continue; }
    skip_space(h, i);
    if (i < h.size() && h[i] == '}') break;
    throw fail("expected ',' or '}'");
  }
  if (!out.has_descr || !out.has_order || !out.has_shape) throw fail("missing descr, fortran_order or shape");
  return out;
}

inline DType parse_descr(const std::string& d) {
  if (d == "<f4") return DType::f4;
  if (d == "<f8") return DType::f8;
  if (d == "|u1" || d == "<u1" || d == "u1") return DType::u1;
  throw NpyUnsupported("npy: unsupported dtype '" + d + "' (supported: <f4, <f8, |u1)");
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_npy(const NpyArray& a) {
  if (a.payload.size() != a.numel() * dtype_size(a.dtype)) throw std::invalid_argument("npy: payload size mismatch");
  const auto header = detail::npy_header(a.dtype, a.shape);
  std::vector<std::uint8_t> out;
  out.reserve(10 + header.size() + a.payload.size());
  out.insert(out.end(), detail::kNpyMagic, detail::kNpyMagic + 6);
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(header.size() & 0xFF));
  out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), a.payload.begin(), a.payload.end());
  return out;
}

inline NpyArray decode_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kNpyMagic, 6) != 0) throw NpyBadMagic("npy: bad magic");
  const unsigned major = bytes[6], minor = bytes[7];
  std::size_t header_len = 0, offset = 0;
  if (major == 1 && minor == 0) {
    if (bytes.size() < 10) throw NpyTruncated("npy: truncated header length");
    header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
    offset = 10;
  } else if (major == 2 && minor == 0) {
    if (bytes.size() < 12) throw NpyTruncated("npy: truncated header length");
    for (int k = 3; k >= 0; --k) header_len = (header_len << 8) | bytes[8 + k];
    offset = 12;
  } else {
    throw NpyUnsupported("npy: unsupported version " + std::to_string(major) + "." + std::to_string(minor));
  }
  if (bytes.size() < offset + header_len) throw NpyTruncated("npy: truncated header");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data() + offset), header_len);
  const auto parsed = detail::parse_npy_header(header);
  NpyArray a;
  a.dtype = detail::parse_descr(parsed.descr);
  if (parsed.fortran) throw NpyUnsupported("npy: Fortran-order arrays are not supported");
  a.shape = parsed.shape;
  const std::size_t need = a.numel() * dtype_size(a.dtype);
  const std::size_t have = bytes.size() - offset - header_len;
  if (have < need) {
    throw NpyTruncated("npy: payload has " + std::to_string(have) + " bytes, shape needs " + std::to_string(need));
  }
  const auto* p = bytes.data() + offset + header_len;
  a.payload.assign(p, p + need);
  return a;
}

inline void write_npy(const std::string& path, const NpyArray& a) {
  const auto bytes = encode_npy(a);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

inline NpyArray read_npy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_npy(bytes);
}

}  // namespace roixai
