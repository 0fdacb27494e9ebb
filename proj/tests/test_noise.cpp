#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "s2dip/noise.hpp"

using namespace s2dip;

namespace {

Cube half(std::size_t h, std::size_t w, std::size_t b) { return Cube(h, w, b, 0.5); }

}  // namespace

TEST(Noise, GaussianSampleStd) {
  Rng rng(1);
  const Cube y = add_gaussian(half(100, 100, 10), 0.1, rng);
  double s = 0.0, ss = 0.0;
  for (double v : y.data()) {
    s += v - 0.5;
    ss += (v - 0.5) * (v - 0.5);
  }
  const double n = static_cast<double>(y.size());
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  EXPECT_GE(sd, 0.098);
  EXPECT_LE(sd, 0.102);
}

TEST(Noise, ImpulseFractionAndValues) {
  Rng rng(2);
  const Cube y = add_impulse(half(100, 100, 10), 0.1, rng);
  std::size_t hit = 0;
  for (double v : y.data()) {
    if (v != 0.5) {
      ++hit;
      EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
  }
  const double frac = static_cast<double>(hit) / static_cast<double>(y.size());
  EXPECT_GE(frac, 0.09);
  EXPECT_LE(frac, 0.11);
}

TEST(Noise, BandCountIsCeiling) {
  EXPECT_EQ(corrupted_band_count(0.4, 8), 4u);
  EXPECT_EQ(corrupted_band_count(0.4, 10), 4u);
  EXPECT_EQ(corrupted_band_count(0.4, 31), 13u);
  EXPECT_EQ(corrupted_band_count(0.5, 7), 4u);
  EXPECT_EQ(corrupted_band_count(0.0, 7), 0u);
  EXPECT_EQ(corrupted_band_count(1.0, 7), 7u);
  EXPECT_THROW(corrupted_band_count(1.5, 7), ValueError);
}

TEST(Noise, Case5StripesAndDeadlines) {
  std::set<std::size_t> counts_seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Cube x = half(20, 32, 10);
    CorruptionLog log;
    const Cube y = corrupt(x, case_preset(5), Rng(seed), &log);
    ASSERT_EQ(log.stripes.size(), 4u);
    ASSERT_EQ(log.deadlines.size(), 5u);
    std::set<std::size_t> bands;
    for (const auto& hit : log.stripes) {
      bands.insert(hit.band);
      EXPECT_GE(hit.columns.size(), 6u);
      EXPECT_LE(hit.columns.size(), 15u);
      counts_seen.insert(hit.columns.size());
      EXPECT_EQ(std::set<std::size_t>(hit.columns.begin(), hit.columns.end()).size(), hit.columns.size());
    }
    EXPECT_EQ(bands.size(), 4u);
    for (const auto& hit : log.deadlines) {
      EXPECT_GE(hit.columns.size(), 6u);
      EXPECT_LE(hit.columns.size(), 10u);
      for (std::size_t c : hit.columns)
        for (std::size_t h = 0; h < 20; ++h) EXPECT_EQ(y(h, c, hit.band), 0.0);
    }
  }
  EXPECT_TRUE(counts_seen.count(6) && counts_seen.count(15));
}

TEST(Noise, StripesShiftWholeColumns) {
  Rng rng(3);
  std::vector<ColumnHits> hits;
  const Cube y = add_stripes(half(6, 20, 5), 0.4, {6, 15}, rng, &hits);
  for (const auto& hit : hits)
    for (std::size_t c : hit.columns) {
      const double offset = y(0, c, hit.band) - 0.5;
      EXPECT_LE(std::abs(offset), kStripeAmplitude);
      for (std::size_t h = 1; h < 6; ++h) EXPECT_DOUBLE_EQ(y(h, c, hit.band) - 0.5, offset);
    }
}

TEST(Noise, CorruptIsDeterministic) {
  const Cube x = half(16, 16, 6);
  EXPECT_EQ(corrupt(x, case_preset(5), Rng(7)), corrupt(x, case_preset(5), Rng(7)));
  EXPECT_NE(corrupt(x, case_preset(5), Rng(7)), corrupt(x, case_preset(5), Rng(8)));
}

TEST(Noise, Presets) {
  EXPECT_EQ(case_preset(1).gaussian_sigma, 0.2);
  EXPECT_EQ(case_preset(1).impulse_rate, 0.0);
  for (int c = 2; c <= 5; ++c) {
    EXPECT_EQ(case_preset(c).gaussian_sigma, 0.1);
    EXPECT_EQ(case_preset(c).impulse_rate, 0.1);
  }
  EXPECT_EQ(case_preset(2).stripe_band_fraction, 0.0);
  EXPECT_EQ(case_preset(3).stripe_band_fraction, 0.4);
  EXPECT_EQ(case_preset(3).stripe_count_range, (CountRange{6, 15}));
  EXPECT_EQ(case_preset(4).deadline_band_fraction, 0.5);
  EXPECT_EQ(case_preset(4).deadline_count_range, (CountRange{6, 10}));
  EXPECT_EQ(case_preset(5).stripe_band_fraction, 0.4);
  EXPECT_EQ(case_preset(5).deadline_band_fraction, 0.5);
  EXPECT_EQ(case_lambda_over_n(1), 0.2);
  EXPECT_EQ(case_lambda_over_n(2), 0.4);
  EXPECT_EQ(case_lambda_over_n(3), 1.0);
  EXPECT_THROW(case_preset(0), ValueError);
  EXPECT_THROW(case_lambda_over_n(6), ValueError);
}

TEST(Noise, Errors) {
  Rng rng(4);
  EXPECT_THROW(add_gaussian(half(2, 2, 2), -1.0, rng), ValueError);
  EXPECT_THROW(add_impulse(half(2, 2, 2), 1.5, rng), ValueError);
  EXPECT_THROW(add_stripes(half(4, 10, 5), 0.4, {6, 15}, rng), ValueError);  // wider than the image
  EXPECT_THROW(corrupt(Cube(2, 2, 2, 1.5), case_preset(2), Rng(0)), ValueError);
  NoiseSpec bad;
  bad.stripe_count_range = {5, 2};
  EXPECT_THROW(validate(bad), ValueError);
}
