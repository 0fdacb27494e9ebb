#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "s2dip/noise.hpp"
#include "s2dip/pipeline.hpp"
#include "s2dip/synthetic.hpp"

using namespace s2dip;

namespace {

RunConfig tiny_run(std::size_t k_max) {
  RunConfig c;
  c.network.depth = 1;
  c.network.channels = {2};
  c.stop.k_max = k_max;
  c.stop.check_interval = 5;
  c.seed = 3;
  return c;
}

Cube noisy_scene(Cube* clean = nullptr) {
  Rng rng(1);
  Cube x = synthetic_scene(8, 8, 3, rng);
  if (clean) *clean = x;
  return corrupt(x, case_preset(2), Rng(2));
}

// Output sequence c * (1 + e_k) whose RelErr between consecutive checks is
// known in closed form.
Cube scaled(double factor) { return Cube(2, 2, 2, factor); }

}  // namespace

TEST(RelErr, ExamplesAndOracle) {
  EXPECT_NEAR(rel_err(scaled(1.1), scaled(1.0)), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(rel_err(scaled(2.0), scaled(2.0)), 0.0);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Cube a(uniform(rng, {3, 4, 5}, 0, 1)), b(uniform(rng, {3, 4, 5}, 0, 1));
    EXPECT_NEAR(rel_err(a, b), oracle::rel_err(a, b), 1e-12);
  }
  EXPECT_THROW(rel_err(scaled(1.0), Cube(2, 2, 2)), ValueError);
  EXPECT_THROW(rel_err(scaled(1.0), Cube(2, 2, 3, 1.0)), ShapeError);
}

TEST(StoppingRule, StopsAtFirstCheckBelowTolerance) {
  StoppingRule rule({0.01, 7000, 10});
  // Check points 11, 21, 31 see RelErr 0.05, 0.02, 0.005.
  const std::vector<double> level{1.0, 1.05, 1.05 * 1.02, 1.05 * 1.02 * 1.005};
  std::optional<StopReason> stop;
  std::size_t k = 1;
  for (; k <= 100 && !stop; ++k) {
    const std::size_t segment = (k - 1) / 10;
    stop = rule.observe(k, scaled(level[std::min<std::size_t>(segment, 3)]));
    if (k == 11 || k == 21) {
      ASSERT_TRUE(rule.last_rel_err());
      EXPECT_GT(*rule.last_rel_err(), 0.01);
    }
  }
  EXPECT_EQ(stop, StopReason::tolerance);
  EXPECT_EQ(k - 1, 31u);
  EXPECT_NEAR(*rule.last_rel_err(), 0.005, 1e-12);
}

TEST(StoppingRule, NeverExceedsKmax) {
  StoppingRule rule({0.01, 7000, 100});
  std::size_t k = 1;
  for (;; ++k) {
    if (rule.observe(k, scaled(static_cast<double>(k)))) break;
  }
  EXPECT_EQ(k, 7000u);
}

TEST(StoppingRule, CheckPointsAndOrdering) {
  StoppingRule rule({0.01, 50, 10});
  EXPECT_FALSE(rule.is_check_point(1));
  EXPECT_TRUE(rule.is_check_point(11));
  EXPECT_FALSE(rule.is_check_point(10));
  EXPECT_THROW(rule.observe(2, scaled(1)), ValueError);
  EXPECT_THROW(StoppingRule({0.0, 10, 10}), ValueError);
  EXPECT_THROW(StoppingRule({0.01, 0, 10}), ValueError);
}

TEST(Pipeline, SingleIterationRun) {
  const RunReport r = run(noisy_scene(), tiny_run(1));
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.stop_reason, StopReason::max_iterations);
  EXPECT_EQ(r.loss.size(), 1u);
  EXPECT_TRUE(r.rel_err.empty());
}

TEST(Pipeline, LooseToleranceStopsAtFirstCheck) {
  RunConfig c = tiny_run(100);
  c.stop.relerr_tol = 1e9;
  const RunReport r = run(noisy_scene(), c);
  EXPECT_EQ(r.stop_reason, StopReason::tolerance);
  EXPECT_EQ(r.iterations, 6u);
  ASSERT_EQ(r.rel_err.size(), 1u);
  EXPECT_EQ(r.rel_err[0].iteration, 6u);
}

TEST(Pipeline, DeterministicForEqualSeeds) {
  const Cube y = noisy_scene();
  const RunReport a = run(y, tiny_run(12)), b = run(y, tiny_run(12));
  EXPECT_EQ(a.output, b.output);
  EXPECT_EQ(a.loss, b.loss);
  RunConfig other = tiny_run(12);
  other.seed = 4;
  EXPECT_NE(run(y, other).output, a.output);
}

TEST(Pipeline, BaselineEqualsZeroLambda) {
  const Cube y = noisy_scene();
  RunConfig c = tiny_run(8);
  const RunReport base = run_dip_baseline(y, c);
  c.lambda_over_n = 0.0;
  EXPECT_EQ(base.output, run(y, c).output);
}

TEST(Pipeline, TraceAndBestIterate) {
  Cube clean(1, 1, 1);
  const Cube y = noisy_scene(&clean);
  RunConfig c = tiny_run(20);
  c.trace_reference = clean;
  std::size_t calls = 0;
  const RunReport r = run(y, c, [&](const IterationInfo& info) {
    EXPECT_EQ(info.iteration, ++calls);
    EXPECT_TRUE(info.psnr.has_value());
  });
  EXPECT_EQ(calls, r.iterations);
  ASSERT_EQ(r.psnr.size(), r.iterations);
  const auto best = std::max_element(r.psnr.begin(), r.psnr.end());
  EXPECT_EQ(r.best_psnr, *best);
  EXPECT_EQ(r.best_iteration, static_cast<std::size_t>(best - r.psnr.begin()) + 1);
  ASSERT_TRUE(r.best_output);
  EXPECT_DOUBLE_EQ(psnr(clean, *r.best_output), r.best_psnr);
  EXPECT_DOUBLE_EQ(psnr(clean, r.output), r.psnr.back());
}

TEST(Pipeline, LossDecreasesOverShortRun) {
  const RunReport r = run(noisy_scene(), tiny_run(60));
  EXPECT_LT(r.loss.back(), r.loss.front());
}

TEST(Pipeline, RejectsBadInputs) {
  Cube y = noisy_scene();
  y(0, 0, 0) = std::nan("");
  EXPECT_THROW(run(y, tiny_run(2)), ValueError);
  RunConfig c = tiny_run(2);
  c.lr = 0.0;
  EXPECT_THROW(run(noisy_scene(), c), ValueError);
  c = tiny_run(2);
  c.trace_reference = Cube(2, 2, 2);
  EXPECT_THROW(run(noisy_scene(), c), ShapeError);
}
