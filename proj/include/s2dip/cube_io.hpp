#pragma once

// HSIC cube files. Header (20 bytes, little-endian):
//   "HSIC" | u16 version | u32 H | u32 W | u32 B | u16 dtype
// followed by H*W*B f32 values, band axis fastest.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "s2dip/cube.hpp"
#include "s2dip/error.hpp"

namespace s2dip {

inline constexpr std::array<char, 4> kCubeMagic{'H', 'S', 'I', 'C'};
inline constexpr std::uint16_t kCubeVersion = 1;
inline constexpr std::uint16_t kDtypeF32 = 1;
inline constexpr std::size_t kCubeHeaderBytes = 20;

namespace detail {

inline void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

inline std::uint32_t f32_bits(double v) { return std::bit_cast<std::uint32_t>(static_cast<float>(v)); }
inline double from_f32_bits(std::uint32_t bits) { return static_cast<double>(std::bit_cast<float>(bits)); }

}  // namespace detail

inline std::vector<unsigned char> encode_cube(const Cube& cube) {
  constexpr auto max32 = std::numeric_limits<std::uint32_t>::max();
  if (cube.height() > max32 || cube.width() > max32 || cube.bands() > max32) {
    throw ValueError("cube extents do not fit the 32-bit header fields");
  }
  std::vector<unsigned char> out(kCubeMagic.begin(), kCubeMagic.end());
  out.reserve(kCubeHeaderBytes + 4 * cube.size());
  detail::put_le(out, kCubeVersion, 2);
  detail::put_le(out, cube.height(), 4);
  detail::put_le(out, cube.width(), 4);
  detail::put_le(out, cube.bands(), 4);
  detail::put_le(out, kDtypeF32, 2);
  for (double v : cube.data()) detail::put_le(out, detail::f32_bits(v), 4);
  return out;
}

inline Cube decode_cube(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < kCubeHeaderBytes) {
    throw IoError(origin + ": truncated header: expected " + std::to_string(kCubeHeaderBytes) + " bytes, got " +
                  std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kCubeMagic.data(), kCubeMagic.size()) != 0) {
    throw IoError(origin + ": bad magic, not an HSIC cube file");
  }
  const unsigned char* p = bytes.data();
  const auto version = detail::get_le(p + 4, 2);
  if (version != kCubeVersion) throw IoError(origin + ": unsupported cube format version " + std::to_string(version));
  const std::uint64_t H = detail::get_le(p + 6, 4), W = detail::get_le(p + 10, 4), B = detail::get_le(p + 14, 4);
  const auto dtype = detail::get_le(p + 18, 2);
  if (dtype != kDtypeF32) throw IoError(origin + ": unsupported dtype tag " + std::to_string(dtype));
  if (H == 0 || W == 0 || B == 0) throw IoError(origin + ": cube extents must be >= 1");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 4;
  if (H > limit / W || H * W > limit / B) throw IoError(origin + ": dimension overflow");
  const std::uint64_t expected = 4 * H * W * B;
  const std::uint64_t actual = bytes.size() - kCubeHeaderBytes;
  if (actual < expected) {
    throw IoError(origin + ": truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(actual));
  }
  if (actual > expected) {
    throw IoError(origin + ": trailing data: expected " + std::to_string(expected) + " payload bytes, got " +
                  std::to_string(actual));
  }
  Cube cube(H, W, B);
  const unsigned char* payload = p + kCubeHeaderBytes;
  auto data = cube.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = detail::from_f32_bits(static_cast<std::uint32_t>(detail::get_le(payload + 4 * i, 4)));
  return cube;
}

inline void write_cube(const Cube& cube, const std::filesystem::path& path) {
  detail::write_file(path, encode_cube(cube));
}

inline Cube read_cube(const std::filesystem::path& path) { return decode_cube(detail::read_file(path), path.string()); }

/// Values as they survive a write/read round trip.
inline Cube quantize_f32(const Cube& cube) {
  Cube out = cube;
  for (auto& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace s2dip
