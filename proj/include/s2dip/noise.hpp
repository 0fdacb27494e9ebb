#pragma once

// Mixed-noise simulator. corrupt() applies, in this order:
//   1. additive Gaussian noise on every element (not clipped)
//   2. salt-and-pepper impulses: each element replaced by 0 or 1 with rate p
//   3. stripes: in ceil(f1 * B) bands, s1 distinct columns get a constant
//      additive offset drawn from U[-0.25, 0.25]
//   4. deadlines: in ceil(f2 * B) bands, s2 distinct columns are set to 0
// Each stage draws from its own split of the caller's generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "s2dip/cube.hpp"
#include "s2dip/error.hpp"
#include "s2dip/rng.hpp"

namespace s2dip {

struct CountRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  friend bool operator==(const CountRange&, const CountRange&) = default;
};

struct NoiseSpec {
  double gaussian_sigma = 0.0;
  double impulse_rate = 0.0;
  double stripe_band_fraction = 0.0;
  CountRange stripe_count_range{};
  double deadline_band_fraction = 0.0;
  CountRange deadline_count_range{};

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

inline constexpr double kStripeAmplitude = 0.25;

/// Corruption recipes for cases 1..5.
inline NoiseSpec case_preset(int case_id) {
  NoiseSpec s;
  switch (case_id) {
    case 1:
      s.gaussian_sigma = 0.2;
      return s;
    case 2:
    case 3:
    case 4:
    case 5:
      s.gaussian_sigma = 0.1;
      s.impulse_rate = 0.1;
      if (case_id == 3 || case_id == 5) {
        s.stripe_band_fraction = 0.4;
        s.stripe_count_range = {6, 15};
      }
      if (case_id == 4 || case_id == 5) {
        s.deadline_band_fraction = 0.5;
        s.deadline_count_range = {6, 10};
      }
      return s;
    default:
      throw ValueError("noise case must be in 1..5, got " + std::to_string(case_id));
  }
}

/// Regularization weight per case, expressed as lambda * N.
inline double case_lambda_over_n(int case_id) {
  static constexpr std::array<double, 5> kLambdaOverN{0.2, 0.4, 1.0, 0.4, 1.0};
  if (case_id < 1 || case_id > 5) throw ValueError("noise case must be in 1..5, got " + std::to_string(case_id));
  return kLambdaOverN[static_cast<std::size_t>(case_id - 1)];
}

/// Number of bands hit when a fraction of `bands` is corrupted.
inline std::size_t corrupted_band_count(double fraction, std::size_t bands) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValueError("band fraction must be in [0, 1]");
  // Tolerance keeps e.g. 0.3 * 10 from rounding up to 4.
  const double raw = fraction * static_cast<double>(bands);
  return std::min(bands, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

/// `count` distinct values from [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t count) {
  if (count > n) throw ValueError("cannot draw more distinct items than available");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

inline Cube add_gaussian(const Cube& x, double sigma, Rng& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValueError("gaussian noise: sigma must be finite and >= 0");
  Cube y = x;
  if (sigma == 0.0) return y;
  for (auto& v : y.data()) v += sigma * rng.normal();
  return y;
}

inline Cube add_impulse(const Cube& x, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValueError("impulse noise: rate must be in [0, 1]");
  Cube y = x;
  if (p == 0.0) return y;
  for (auto& v : y.data()) {
    if (rng.uniform01() < p) v = rng.coin() ? 1.0 : 0.0;
  }
  return y;
}

/// Which columns of which bands a column-wise corruption touches.
struct ColumnHits {
  std::size_t band;
  std::vector<std::size_t> columns;
};

inline std::vector<ColumnHits> draw_column_hits(std::size_t width, std::size_t bands, double fraction,
                                                CountRange range, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValueError("band fraction must be in [0, 1]");
  const std::size_t n_bands = corrupted_band_count(fraction, bands);
  if (n_bands == 0) return {};
  if (range.lo > range.hi) throw ValueError("column count range must satisfy lo <= hi");
  if (range.hi > width) {
    throw ValueError("column count range [" + std::to_string(range.lo) + "," + std::to_string(range.hi) +
                     "] exceeds image width " + std::to_string(width));
  }
  std::vector<ColumnHits> hits;
  for (std::size_t band : sample_without_replacement(rng, bands, n_bands)) {
    const auto count = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(range.lo), static_cast<std::int64_t>(range.hi)));
    hits.push_back({band, sample_without_replacement(rng, width, count)});
  }
  return hits;
}

inline Cube add_stripes(const Cube& x, double band_fraction, CountRange range, Rng& rng,
                        std::vector<ColumnHits>* record = nullptr) {
  Cube y = x;
  auto hits = draw_column_hits(x.width(), x.bands(), band_fraction, range, rng);
  for (const auto& hit : hits) {
    for (std::size_t col : hit.columns) {
      const double offset = rng.uniform(-kStripeAmplitude, kStripeAmplitude);
      for (std::size_t h = 0; h < y.height(); ++h) y(h, col, hit.band) += offset;
    }
  }
  if (record) *record = std::move(hits);
  return y;
}

inline Cube add_deadlines(const Cube& x, double band_fraction, CountRange range, Rng& rng,
                          std::vector<ColumnHits>* record = nullptr) {
  Cube y = x;
  auto hits = draw_column_hits(x.width(), x.bands(), band_fraction, range, rng);
  for (const auto& hit : hits) {
    for (std::size_t col : hit.columns)
      for (std::size_t h = 0; h < y.height(); ++h) y(h, col, hit.band) = 0.0;
  }
  if (record) *record = std::move(hits);
  return y;
}

inline void validate(const NoiseSpec& s) {
  if (!(s.gaussian_sigma >= 0.0) || !std::isfinite(s.gaussian_sigma)) throw ValueError("sigma must be >= 0");
  if (!(s.impulse_rate >= 0.0 && s.impulse_rate <= 1.0)) throw ValueError("impulse rate must be in [0, 1]");
  for (double f : {s.stripe_band_fraction, s.deadline_band_fraction})
    if (!(f >= 0.0 && f <= 1.0)) throw ValueError("band fractions must be in [0, 1]");
  if (s.stripe_count_range.lo > s.stripe_count_range.hi || s.deadline_count_range.lo > s.deadline_count_range.hi) {
    throw ValueError("count ranges must satisfy lo <= hi");
  }
}

/// Bands and columns touched by the column-wise stages of one corrupt() call.
struct CorruptionLog {
  std::vector<ColumnHits> stripes;
  std::vector<ColumnHits> deadlines;
};

/// y = x + v for the mixed noise v described by `spec`.
inline Cube corrupt(const Cube& x, const NoiseSpec& spec, const Rng& rng, CorruptionLog* log = nullptr) {
  validate(spec);
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValueError("corrupt: clean cube must lie in [0, 1]");
  }
  Rng g = rng.split(1), im = rng.split(2), st = rng.split(3), dl = rng.split(4);
  Cube y = add_gaussian(x, spec.gaussian_sigma, g);
  y = add_impulse(y, spec.impulse_rate, im);
  y = add_stripes(y, spec.stripe_band_fraction, spec.stripe_count_range, st, log ? &log->stripes : nullptr);
  return add_deadlines(y, spec.deadline_band_fraction, spec.deadline_count_range, dl,
                       log ? &log->deadlines : nullptr);
}

}  // namespace s2dip
