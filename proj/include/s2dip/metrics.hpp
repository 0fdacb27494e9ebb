#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "s2dip/cube.hpp"
#include "s2dip/error.hpp"

namespace s2dip {

struct MetricsReport {
  double psnr = 0.0;  // dB, mean over bands; +inf for identical cubes
  double ssim = 0.0;  // mean over bands
  double sam = 0.0;   // radians, mean over pixels
};

/// Mean of per-band PSNR with peak 1. Bands reproduced exactly are left out
/// of the mean; if every band is exact the result is +inf.
inline double psnr(const Cube& ref, const Cube& est) {
  require_same_shape(ref, est, "psnr");
  const std::size_t B = ref.bands(), pixels = ref.height() * ref.width();
  std::vector<double> err(B, 0.0);
  const double* r = ref.data().data();
  const double* e = est.data().data();
  for (std::size_t p = 0; p < pixels; ++p)
    for (std::size_t b = 0; b < B; ++b) {
      const double d = r[p * B + b] - e[p * B + b];
      err[b] += d * d;
    }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t b = 0; b < B; ++b) {
    if (err[b] == 0.0) continue;
    total += 10.0 * std::log10(1.0 / (err[b] / static_cast<double>(pixels)));
    ++counted;
  }
  if (counted == 0) return std::numeric_limits<double>::infinity();
  return total / static_cast<double>(counted);
}

namespace detail {

inline std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double c = static_cast<double>(size - 1) / 2.0;
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

// Separable "valid" filtering of an H x W image.
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t H, std::size_t W,
                                        const std::vector<double>& w) {
  const std::size_t k = w.size(), Wo = W - k + 1, Ho = H - k + 1;
  std::vector<double> rows(H * Wo, 0.0);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t x = 0; x < Wo; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += w[t] * img[h * W + x + t];
      rows[h * Wo + x] = s;
    }
  std::vector<double> out(Ho * Wo, 0.0);
  for (std::size_t y = 0; y < Ho; ++y)
    for (std::size_t x = 0; x < Wo; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += w[t] * rows[(y + t) * Wo + x];
      out[y * Wo + x] = s;
    }
  return out;
}

}  // namespace detail

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean over bands of the Gaussian-windowed SSIM index (11x11, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1), averaged over valid windows.
inline double ssim(const Cube& ref, const Cube& est) {
  require_same_shape(ref, est, "ssim");
  const std::size_t H = ref.height(), W = ref.width(), B = ref.bands();
  if (H < kSsimWindow || W < kSsimWindow) {
    throw ShapeError("ssim: image " + to_string(ref.shape()) + " is smaller than the 11x11 window");
  }
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const auto w = detail::gaussian_window(kSsimWindow, kSsimSigma);
  std::vector<double> x(H * W), y(H * W), xx(H * W), yy(H * W), xy(H * W);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t c = 0; c < W; ++c) {
        const double a = ref(h, c, b), e = est(h, c, b);
        const std::size_t i = h * W + c;
        x[i] = a;
        y[i] = e;
        xx[i] = a * a;
        yy[i] = e * e;
        xy[i] = a * e;
      }
    const auto mx = detail::filter_valid(x, H, W, w);
    const auto my = detail::filter_valid(y, H, W, w);
    const auto sxx = detail::filter_valid(xx, H, W, w);
    const auto syy = detail::filter_valid(yy, H, W, w);
    const auto sxy = detail::filter_valid(xy, H, W, w);
    double band = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      band += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
              ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += band / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(B);
}

/// Mean spectral angle (radians) over pixels. Pixels where either spectrum
/// has zero norm are skipped.
inline double sam(const Cube& ref, const Cube& est) {
  require_same_shape(ref, est, "sam");
  const std::size_t B = ref.bands(), pixels = ref.height() * ref.width();
  const double* r = ref.data().data();
  const double* e = est.data().data();
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    double dot = 0.0, nr = 0.0, ne = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double a = r[p * B + b], c = e[p * B + b];
      dot += a * c;
      nr += a * a;
      ne += c * c;
    }
    if (nr == 0.0 || ne == 0.0) continue;
    const double cosine = std::clamp(dot / std::sqrt(nr * ne), -1.0, 1.0);
    total += std::acos(cosine);
    ++counted;
  }
  if (counted == 0) throw ValueError("sam: no pixel has a nonzero spectrum in both cubes");
  return total / static_cast<double>(counted);
}

inline MetricsReport evaluate(const Cube& ref, const Cube& est) {
  return MetricsReport{psnr(ref, est), ssim(ref, est), sam(ref, est)};
}

}  // namespace s2dip
