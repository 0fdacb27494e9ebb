#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "s2dip/autodiff.hpp"
#include "s2dip/rng.hpp"

using namespace s2dip;
using gradcheck::worst_relative_error;

namespace {

// Random values kept away from 0 so the l1 kink is never straddled.
Tensor away_from_zero(Rng& rng, const Shape& shape) {
  Tensor t = uniform(rng, shape, 0.1, 1.0);
  for (auto& v : t.data())
    if (rng.uniform01() < 0.5) v = -v;
  return t;
}

}  // namespace

TEST(Tape, BackwardOnConstantsLeavesLeavesUntouched) {
  Tape t;
  Var a = t.leaf(Tensor(Shape{2}, 1.0));
  Var c = t.constant(Tensor(Shape{2}, 3.0));
  Var loss = ad::sum(ad::mul(a, c));
  t.backward(loss);
  EXPECT_EQ(t.grad(a), Tensor(Shape{2}, 3.0));
  EXPECT_FALSE(t.requires_grad(c));
  EXPECT_EQ(t.grad(c), Tensor(Shape{2}, 0.0));
}

TEST(Tape, RejectsNonScalarLossAndDoubleBackward) {
  Tape t;
  Var a = t.leaf(Tensor(Shape{3}, 1.0));
  EXPECT_THROW(t.backward(a), ShapeError);
  Var s = ad::sum(a);
  t.backward(s);
  EXPECT_THROW(t.backward(s), Error);
  t.reset_gradients();
  EXPECT_NO_THROW(t.backward(s));
  EXPECT_EQ(t.grad(a), Tensor(Shape{3}, 1.0));
}

TEST(Tape, SharedSubexpressionsAccumulate) {
  Tape t;
  Var a = t.leaf(Tensor(Shape{1}, 3.0));
  Var loss = ad::sum(ad::mul(a, a));  // d/da a^2 = 2a
  t.backward(loss);
  EXPECT_EQ(t.grad(a)[0], 6.0);
}

TEST(Tape, MixingTapesIsAnError) {
  Tape t1, t2;
  Var a = t1.leaf(Tensor(Shape{1}, 1.0));
  Var b = t2.leaf(Tensor(Shape{1}, 1.0));
  EXPECT_THROW(ad::add(a, b), ValueError);
}

TEST(SumAbs, SubgradientIsSignWithZeroAtZero) {
  Tape t;
  Var a = t.leaf(Tensor(Shape{3}, std::vector<double>{-2.0, 0.5, 0.0}));
  t.backward(ad::sum_abs(a));
  EXPECT_EQ(t.grad(a), Tensor(Shape{3}, std::vector<double>{-1.0, 1.0, 0.0}));
}

TEST(GradCheck, ElementwiseAndReductionOps) {
  Rng rng(1);
  const Shape s{3, 4};
  auto check = [&](const gradcheck::Builder& f, int n_inputs) {
    std::vector<Tensor> in;
    for (int i = 0; i < n_inputs; ++i) in.push_back(away_from_zero(rng, s));
    return worst_relative_error(f, in);
  };
  using V = std::vector<Var>;
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum(ad::add(v[0], v[1])); }, 2), 1e-6);
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum_sq(ad::sub(v[0], v[1])); }, 2), 1e-6);
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum(ad::mul(v[0], v[1])); }, 2), 1e-6);
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum_abs(ad::scale(v[0], -1.5)); }, 1), 1e-6);
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum_sq(ad::leaky_relu(v[0], 0.1)); }, 1), 1e-6);
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum_sq(ad::sigmoid(v[0])); }, 1), 1e-6);
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum_sq(ad::reshape(v[0], {2, 6})); }, 1), 1e-6);
  EXPECT_LT(check([](Tape&, const V& v) { return ad::sum_sq(ad::slice_shift_diff(v[0], 1)); }, 1), 1e-6);
}

TEST(GradCheck, FeatureMapOps) {
  Rng rng(2);
  using V = std::vector<Var>;
  const Tensor x = uniform(rng, {2, 4, 6, 3}, -1, 1);
  const Tensor w = uniform(rng, {2, 4, 6, 3}, -1, 1);
  const Tensor pooled_weight = uniform(rng, {2, 2, 3, 3}, -1, 1);
  EXPECT_LT(worst_relative_error(
                [&](Tape& t, const V& v) {
                  return ad::sum(ad::mul(ad::maxpool2d_per_band(v[0]), t.constant(pooled_weight)));
                },
                {x}),
            1e-6);
  EXPECT_LT(worst_relative_error(
                [&](Tape&, const V& v) { return ad::sum_sq(ad::upsample2d_per_band(v[0])); }, {x}),
            1e-6);
  EXPECT_LT(worst_relative_error(
                [&](Tape&, const V& v) { return ad::sum_sq(ad::sub(ad::concat_channels(v[0], v[1]),
                                                                   ad::concat_channels(v[1], v[0]))); },
                {x, w}),
            1e-6);
  EXPECT_LT(worst_relative_error(
                [&](Tape&, const V& v) { return ad::sum_sq(ad::crop_spatial(v[0], 3, 5)); }, {x}),
            1e-6);
}

TEST(GradCheck, Convolutions) {
  Rng rng(3);
  using V = std::vector<Var>;
  const Tensor x = uniform(rng, {2, 4, 5, 6}, -1, 1);
  const Tensor b = uniform(rng, {3}, -1, 1);
  EXPECT_LT(worst_relative_error(
                [](Tape&, const V& v) { return ad::sum_sq(ad::conv_spatial(v[0], v[1], v[2])); },
                {x, uniform(rng, {3, 2, 3, 3}, -1, 1), b}),
            1e-6);
  EXPECT_LT(worst_relative_error(
                [](Tape&, const V& v) { return ad::sum_sq(ad::conv_spectral(v[0], v[1], v[2])); },
                {x, uniform(rng, {3, 2, 5}, -1, 1), b}),
            1e-6);
  EXPECT_LT(worst_relative_error(
                [](Tape&, const V& v) { return ad::sum_sq(ad::conv_pointwise(v[0], v[1], v[2])); },
                {x, uniform(rng, {3, 2}, -1, 1), b}),
            1e-6);
}

// Random small graphs chaining every supported op kind.
TEST(GradCheck, RandomCompositeGraphs) {
  using V = std::vector<Var>;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const Tensor x = uniform(rng, {1, 4, 4, 3}, 0.1, 1.0);
    const Tensor k1 = uniform(rng, {2, 1, 3, 3}, -1, 1), b1 = uniform(rng, {2}, -1, 1);
    const Tensor k2 = uniform(rng, {2, 2, 5}, -1, 1), b2 = uniform(rng, {2}, -1, 1);
    const Tensor k3 = uniform(rng, {1, 4}, -1, 1), b3 = uniform(rng, {1}, -1, 1);
    const Tensor target = uniform(rng, {4, 4, 3}, 0, 1);
    auto f = [&](Tape& t, const V& v) {
      Var h = ad::leaky_relu(ad::conv_spectral(ad::conv_spatial(v[0], v[1], v[2]), v[3], v[4]), 0.1);
      Var skip = h;
      h = ad::upsample2d_per_band(ad::maxpool2d_per_band(h));
      h = ad::concat_channels(h, skip);
      Var out = ad::reshape(ad::sigmoid(ad::conv_pointwise(h, v[5], v[6])), {4, 4, 3});
      Var fit = ad::sum_sq(ad::sub(out, t.constant(target)));
      Var reg = ad::sum_abs(ad::slice_shift_diff(ad::slice_shift_diff(out, 2), 0));
      return ad::add(fit, ad::scale(reg, 0.01));
    };
    EXPECT_LT(worst_relative_error(f, {x, k1, b1, k2, b2, k3, b3}, 1e-6, 1e-6), 1e-3) << "seed " << seed;
  }
}
