#pragma once

#include <utility>

#include "s2dip/tensor.hpp"

namespace s2dip {

/// An H x W x B hyperspectral cube. Band is the fastest axis.
class Cube {
 public:
  Cube(std::size_t height, std::size_t width, std::size_t bands, double fill = 0.0)
      : t_(Shape{height, width, bands}, fill) {}

  explicit Cube(Tensor t) : t_(std::move(t)) {
    if (t_.rank() != 3) throw ShapeError("a cube must have rank 3, got shape " + to_string(t_.shape()));
  }

  std::size_t height() const noexcept { return t_.shape()[0]; }
  std::size_t width() const noexcept { return t_.shape()[1]; }
  std::size_t bands() const noexcept { return t_.shape()[2]; }
  std::size_t size() const noexcept { return t_.size(); }
  const Shape& shape() const noexcept { return t_.shape(); }

  const Tensor& tensor() const& noexcept { return t_; }
  Tensor&& tensor() && noexcept { return std::move(t_); }

  std::span<double> data() noexcept { return t_.data(); }
  std::span<const double> data() const noexcept { return t_.data(); }

  double& operator()(std::size_t h, std::size_t w, std::size_t b) noexcept {
    return t_[(h * width() + w) * bands() + b];
  }
  double operator()(std::size_t h, std::size_t w, std::size_t b) const noexcept {
    return t_[(h * width() + w) * bands() + b];
  }

  friend bool operator==(const Cube& a, const Cube& b) { return a.t_ == b.t_; }

 private:
  Tensor t_;
};

inline void require_same_shape(const Cube& a, const Cube& b, const char* op) {
  require_same_shape(a.tensor(), b.tensor(), op);
}

}  // namespace s2dip
