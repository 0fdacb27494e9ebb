#pragma once

// Read-only NPY support: 3-D, C-order, float32/float64 arrays.

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "s2dip/cube.hpp"
#include "s2dip/cube_io.hpp"
#include "s2dip/error.hpp"

namespace s2dip {

struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::uint64_t> shape;
  std::size_t data_offset = 0;
};

namespace detail {

// Extracts the raw text following `'key':` in the header dictionary.
inline std::string_view npy_field(std::string_view dict, std::string_view key, const std::string& origin) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = dict.find(quoted);
  if (pos == std::string_view::npos) throw IoError(origin + ": NPY header lacks '" + std::string(key) + "'");
  pos = dict.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) throw IoError(origin + ": malformed NPY header");
  ++pos;
  while (pos < dict.size() && dict[pos] == ' ') ++pos;
  return dict.substr(pos);
}

inline NpyHeader parse_npy_header(const std::vector<unsigned char>& bytes, const std::string& origin) {
  static constexpr unsigned char kMagic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError(origin + ": not an NPY file");
  }
  const unsigned major = bytes[6];
  std::size_t header_len = 0, start = 0;
  if (major == 1) {
    header_len = static_cast<std::size_t>(get_le(bytes.data() + 8, 2));
    start = 10;
  } else if (major == 2) {
    if (bytes.size() < 12) throw IoError(origin + ": truncated NPY header");
    header_len = static_cast<std::size_t>(get_le(bytes.data() + 8, 4));
    start = 12;
  } else {
    throw IoError(origin + ": unsupported NPY version " + std::to_string(major) + "." + std::to_string(bytes[7]));
  }
  if (bytes.size() < start + header_len) throw IoError(origin + ": truncated NPY header");
  const std::string dict(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                         bytes.begin() + static_cast<std::ptrdiff_t>(start + header_len));

  NpyHeader h;
  h.data_offset = start + header_len;

  auto descr = npy_field(dict, "descr", origin);
  if (descr.empty() || (descr[0] != '\'' && descr[0] != '"')) throw IoError(origin + ": malformed NPY descr");
  const auto close = descr.find(descr[0], 1);
  if (close == std::string_view::npos) throw IoError(origin + ": malformed NPY descr");
  h.descr = std::string(descr.substr(1, close - 1));

  auto fortran = npy_field(dict, "fortran_order", origin);
  if (fortran.starts_with("True")) {
    h.fortran_order = true;
  } else if (!fortran.starts_with("False")) {
    throw IoError(origin + ": malformed NPY fortran_order");
  }

  auto shape = npy_field(dict, "shape", origin);
  if (shape.empty() || shape[0] != '(') throw IoError(origin + ": malformed NPY shape");
  const auto end = shape.find(')');
  if (end == std::string_view::npos) throw IoError(origin + ": malformed NPY shape");
  std::string_view dims = shape.substr(1, end - 1);
  std::size_t i = 0;
  while (i < dims.size()) {
    while (i < dims.size() && (dims[i] == ' ' || dims[i] == ',')) ++i;
    if (i == dims.size()) break;
    if (!std::isdigit(static_cast<unsigned char>(dims[i]))) throw IoError(origin + ": malformed NPY shape");
    std::uint64_t v = 0;
    while (i < dims.size() && std::isdigit(static_cast<unsigned char>(dims[i]))) {
      const std::uint64_t digit = static_cast<std::uint64_t>(dims[i] - '0');
      if (v > (UINT64_MAX - digit) / 10) throw IoError(origin + ": NPY dimension overflow");
      v = v * 10 + digit;
      ++i;
    }
    h.shape.push_back(v);
  }
  return h;
}

}  // namespace detail

/// Load a 3-D float NPY array as an H x W x B cube (last axis = bands).
inline Cube decode_npy(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>") {
  const NpyHeader h = detail::parse_npy_header(bytes, origin);
  if (h.fortran_order) throw IoError(origin + ": unsupported layout: Fortran-order NPY arrays are not supported");
  if (h.shape.size() != 3) {
    throw ShapeError(origin + ": expected a 3-D array, got rank " + std::to_string(h.shape.size()));
  }
  const bool known = h.descr == "<f4" || h.descr == ">f4" || h.descr == "<f8" || h.descr == ">f8";
  if (!known) {
    throw IoError(origin + ": unsupported dtype '" + h.descr + "' (expected <f4, >f4, <f8 or >f8)");
  }
  const bool big_endian = h.descr[0] == '>';
  const std::size_t item = h.descr[2] == '4' ? 4 : 8;
  const std::uint64_t H = h.shape[0], W = h.shape[1], B = h.shape[2];
  if (H == 0 || W == 0 || B == 0) throw IoError(origin + ": array extents must be >= 1");
  const std::uint64_t limit = UINT64_MAX / item;
  if (H > limit / W || H * W > limit / B) throw IoError(origin + ": dimension overflow");
  const std::uint64_t expected = H * W * B * item;
  const std::uint64_t actual = bytes.size() - h.data_offset;
  if (actual < expected) {
    throw IoError(origin + ": truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(actual));
  }

  Cube cube(H, W, B);
  auto data = cube.data();
  const unsigned char* p = bytes.data() + h.data_offset;
  unsigned char buf[8];
  for (std::size_t i = 0; i < data.size(); ++i, p += item) {
    for (std::size_t k = 0; k < item; ++k) buf[k] = big_endian ? p[item - 1 - k] : p[k];
    const std::uint64_t bits = detail::get_le(buf, static_cast<int>(item));
    data[i] = item == 4 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)))
                        : std::bit_cast<double>(bits);
  }
  return cube;
}

inline Cube import_npy(const std::filesystem::path& path) {
  return decode_npy(detail::read_file(path), path.string());
}

}  // namespace s2dip
