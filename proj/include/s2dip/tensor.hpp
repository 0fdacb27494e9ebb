#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "s2dip/error.hpp"
#include "s2dip/rng.hpp"

namespace s2dip {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Number of elements, after checking rank >= 1 and every extent >= 1.
inline std::size_t checked_volume(const Shape& shape) {
  if (shape.empty()) throw ShapeError("shape must have rank >= 1");
  std::size_t n = 1;
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape));
    n *= e;
  }
  return n;
}

/// Dense row-major tensor of doubles; the last axis is fastest.
///
/// A default-constructed Tensor is "undefined" (no shape, no data) and is only
/// used as an empty slot, e.g. a gradient that has not been allocated yet.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_volume(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_volume(shape_) != data_.size()) {
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                       to_string(shape_));
    }
  }

  bool defined() const noexcept { return !shape_.empty(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t extent(std::size_t axis) const {
    if (axis >= shape_.size()) throw ShapeError("axis out of range");
    return shape_[axis];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  Shape strides() const {
    Shape s(shape_.size(), 1);
    for (std::size_t d = shape_.size(); d-- > 1;) s[d - 1] = s[d] * shape_[d];
    return s;
  }

  /// Linear offset of a multi-index; out-of-range indices throw.
  std::size_t offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) {
      throw ShapeError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                       std::to_string(shape_.size()));
    }
    std::size_t off = 0;
    for (std::size_t d = 0; d < index.size(); ++d) {
      if (index[d] >= shape_[d]) {
        throw ShapeError("index " + std::to_string(index[d]) + " out of range on axis " +
                         std::to_string(d) + " (extent " + std::to_string(shape_[d]) + ")");
      }
      off = off * shape_[d] + index[d];
    }
    return off;
  }

  Shape unravel(std::size_t linear) const {
    if (linear >= data_.size()) throw ShapeError("linear index out of range");
    Shape idx(shape_.size());
    for (std::size_t d = shape_.size(); d-- > 0;) {
      idx[d] = linear % shape_[d];
      linear /= shape_[d];
    }
    return idx;
  }

  template <typename... I>
  double& at(I... i) {
    const std::size_t idx[] = {static_cast<std::size_t>(i)...};
    return data_[offset(idx)];
  }
  template <typename... I>
  double at(I... i) const {
    const std::size_t idx[] = {static_cast<std::size_t>(i)...};
    return data_[offset(idx)];
  }

  /// Same data, new shape of equal volume.
  Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }
  Tensor reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(data_)); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline Tensor zeros(const Shape& shape) { return Tensor(shape, 0.0); }
inline Tensor full(const Shape& shape, double value) { return Tensor(shape, value); }

inline Tensor uniform(Rng& rng, const Shape& shape, double lo, double hi) {
  if (!(lo < hi)) throw ValueError("uniform: require lo < hi");
  Tensor t(shape);
  for (auto& v : t.data()) v = lo + (hi - lo) * rng.uniform01();
  return t;
}

inline Tensor gaussian(Rng& rng, const Shape& shape, double mean, double sigma) {
  if (!(sigma >= 0.0)) throw ValueError("gaussian: sigma must be >= 0");
  Tensor t(shape, mean);
  if (sigma == 0.0) return t;
  for (auto& v : t.data()) v = mean + sigma * rng.normal();
  return t;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

namespace detail {
template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* name, F f) {
  require_same_shape(a, b, name);
  Tensor out(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
  return out;
}
}  // namespace detail

inline Tensor ew_add(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "ew_add", [](double x, double y) { return x + y; });
}
inline Tensor ew_sub(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "ew_sub", [](double x, double y) { return x - y; });
}
inline Tensor ew_mul(const Tensor& a, const Tensor& b) {
  return detail::zip(a, b, "ew_mul", [](double x, double y) { return x * y; });
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
  return out;
}

/// In-place a += b.
inline void add_inplace(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add_inplace");
  double* pa = a.raw();
  const double* pb = b.raw();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

inline double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

inline double sum_abs(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += std::abs(v);
  return s;
}

inline double sum_sq(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

/// Forward difference along `axis`: out(..., i, ...) = a(..., i+1, ...) - a(..., i, ...).
/// On an H x W x B cube, axes 0, 1, 2 give the vertical, horizontal and
/// spectral difference operators.
inline Tensor slice_shift_diff(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) throw ShapeError("slice_shift_diff: axis out of range");
  const std::size_t n = a.shape()[axis];
  if (n < 2) throw ShapeError("slice_shift_diff: extent along axis must be >= 2");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.shape()[d];
  for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.shape()[d];
  Shape out_shape = a.shape();
  out_shape[axis] = n - 1;
  Tensor out(out_shape);
  const double* src = a.raw();
  double* dst = out.raw();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* s = src + o * n * inner;
    double* d = dst + o * (n - 1) * inner;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t k = 0; k < inner; ++k) d[i * inner + k] = s[(i + 1) * inner + k] - s[i * inner + k];
  }
  return out;
}

/// Adjoint of slice_shift_diff: maps a gradient of the differenced tensor
/// (extent n-1 along axis) back onto the original shape (extent n).
inline Tensor slice_shift_diff_adjoint(const Tensor& g, std::size_t axis, std::size_t n) {
  Shape shape = g.shape();
  if (axis >= shape.size() || shape[axis] + 1 != n) throw ShapeError("slice_shift_diff_adjoint: bad extent");
  shape[axis] = n;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  Tensor out(shape);
  const double* src = g.raw();
  double* dst = out.raw();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* s = src + o * (n - 1) * inner;
    double* d = dst + o * n * inner;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t k = 0; k < inner; ++k) {
        d[(i + 1) * inner + k] += s[i * inner + k];
        d[i * inner + k] -= s[i * inner + k];
      }
  }
  return out;
}

}  // namespace s2dip
