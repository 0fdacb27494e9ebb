#pragma once

// Data fidelity plus hybrid spatial / spatial-spectral total variation:
//
//   L(o) = (1/N) ||o - y||_2^2 + lambda * (alpha1 * TV(o) + alpha2 * SSTV(o))
//   TV(o)   = ||Dv o||_1 + ||Dh o||_1
//   SSTV(o) = ||Dv Db o||_1 + ||Dh Db o||_1
//
// with N = H * W * B. TV terms are unnormalized sums.

#include <cmath>
#include <string>

#include "s2dip/autodiff.hpp"
#include "s2dip/cube.hpp"
#include "s2dip/error.hpp"
#include "s2dip/tensor.hpp"

namespace s2dip {

namespace axis {
inline constexpr std::size_t vertical = 0;
inline constexpr std::size_t horizontal = 1;
inline constexpr std::size_t spectral = 2;
}  // namespace axis

struct LossWeights {
  double lambda = 0.0;
  double alpha1 = 0.01;
  double alpha2 = 1.0;

  void validate() const {
    for (double w : {lambda, alpha1, alpha2})
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValueError("loss weights must be finite and >= 0");
  }

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

inline double mse(const Cube& a, const Cube& b) {
  require_same_shape(a, b, "mse");
  return sum_sq(ew_sub(a.tensor(), b.tensor())) / static_cast<double>(a.size());
}

inline void require_spatial_extent(const Shape& s, const char* op) {
  if (s.size() != 3) throw ShapeError(std::string(op) + ": expected an H x W x B cube, got " + to_string(s));
  if (s[0] < 2 || s[1] < 2) throw ShapeError(std::string(op) + ": needs H, W >= 2, got " + to_string(s));
}

inline double tv(const Cube& x) {
  require_spatial_extent(x.shape(), "tv");
  return sum_abs(slice_shift_diff(x.tensor(), axis::vertical)) +
         sum_abs(slice_shift_diff(x.tensor(), axis::horizontal));
}

inline double sstv(const Cube& x) {
  require_spatial_extent(x.shape(), "sstv");
  if (x.bands() < 2) throw ShapeError("sstv: needs B >= 2, got " + to_string(x.shape()));
  const Tensor db = slice_shift_diff(x.tensor(), axis::spectral);
  return sum_abs(slice_shift_diff(db, axis::vertical)) + sum_abs(slice_shift_diff(db, axis::horizontal));
}

namespace ad {

inline Var mse(Var out, Var target) {
  const double n = static_cast<double>(out.value().size());
  return scale(sum_sq(sub(out, target)), 1.0 / n);
}

inline Var tv(Var x) {
  require_spatial_extent(x.shape(), "tv");
  return add(sum_abs(slice_shift_diff(x, axis::vertical)), sum_abs(slice_shift_diff(x, axis::horizontal)));
}

inline Var sstv(Var x) {
  require_spatial_extent(x.shape(), "sstv");
  if (x.shape()[2] < 2) throw ShapeError("sstv: needs B >= 2, got " + to_string(x.shape()));
  Var db = slice_shift_diff(x, axis::spectral);
  return add(sum_abs(slice_shift_diff(db, axis::vertical)), sum_abs(slice_shift_diff(db, axis::horizontal)));
}

}  // namespace ad

/// Full objective on the tape. `out` is the [H, W, B] network output.
/// With lambda == 0 the regularizer is not recorded at all, so the result is
/// exactly the plain MSE regardless of alpha1, alpha2.
inline Var total_loss(Var out, const Cube& y, const LossWeights& w) {
  w.validate();
  if (out.shape() != y.shape()) {
    throw ShapeError("total_loss: output " + to_string(out.shape()) + " vs target " + to_string(y.shape()));
  }
  Tape& tape = *out.tape;
  Var fit = ad::mse(out, tape.constant(y.tensor()));
  if (w.lambda == 0.0) return fit;
  Var reg = ad::add(ad::scale(ad::tv(out), w.alpha1), ad::scale(ad::sstv(out), w.alpha2));
  return ad::add(fit, ad::scale(reg, w.lambda));
}

/// Eager evaluation of the same objective.
inline double total_loss_value(const Cube& out, const Cube& y, const LossWeights& w) {
  w.validate();
  const double fit = mse(out, y);
  if (w.lambda == 0.0) return fit;
  return fit + w.lambda * (w.alpha1 * tv(out) + w.alpha2 * sstv(out));
}

}  // namespace s2dip
