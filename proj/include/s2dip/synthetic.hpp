#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "s2dip/cube.hpp"
#include "s2dip/error.hpp"
#include "s2dip/rng.hpp"

namespace s2dip {

/// Piecewise-constant scene: a background plus `regions` axis-aligned
/// rectangles painted in order. Each region carries its own smooth spectral
/// ramp, so the cube is constant in space inside a region and linear-ish
/// along bands. Values stay within [0.05, 0.95].
inline Cube synthetic_scene(std::size_t height, std::size_t width, std::size_t bands, Rng& rng,
                            std::size_t regions = 6) {
  if (height == 0 || width == 0 || bands == 0) throw ValueError("synthetic_scene: extents must be >= 1");
  struct Signature {
    double base, slope, bend;
  };
  auto draw_signature = [&rng] {
    return Signature{rng.uniform(0.2, 0.8), rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1)};
  };

  std::vector<std::size_t> label(height * width, 0);
  std::vector<Signature> sig{draw_signature()};
  for (std::size_t r = 1; r <= regions; ++r) {
    const std::size_t h0 = static_cast<std::size_t>(rng.below(height));
    const std::size_t w0 = static_cast<std::size_t>(rng.below(width));
    const std::size_t h1 = std::min(height, h0 + 1 + static_cast<std::size_t>(rng.below(height / 2 + 1)));
    const std::size_t w1 = std::min(width, w0 + 1 + static_cast<std::size_t>(rng.below(width / 2 + 1)));
    for (std::size_t h = h0; h < h1; ++h)
      for (std::size_t w = w0; w < w1; ++w) label[h * width + w] = r;
    sig.push_back(draw_signature());
  }

  Cube cube(height, width, bands);
  for (std::size_t h = 0; h < height; ++h)
    for (std::size_t w = 0; w < width; ++w) {
      const Signature& s = sig[label[h * width + w]];
      for (std::size_t b = 0; b < bands; ++b) {
        const double t = bands > 1 ? static_cast<double>(b) / static_cast<double>(bands - 1) : 0.0;
        const double v = s.base + s.slope * (t - 0.5) + s.bend * (t - 0.5) * (t - 0.5) * 4.0;
        cube(h, w, b) = std::clamp(v, 0.05, 0.95);
      }
    }
  return cube;
}

}  // namespace s2dip
