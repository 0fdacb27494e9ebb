#pragma once

// Reverse-mode automatic differentiation on a dynamic tape.
//
// Every tracked op evaluates eagerly, appends a Node holding its value and a
// backward rule, and returns a Var handle. Creation order is a topological
// order, so backward() simply walks the tape in reverse.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "s2dip/error.hpp"
#include "s2dip/kernels.hpp"
#include "s2dip/tensor.hpp"

namespace s2dip {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input node. Leaves with requires_grad collect dLoss/dLeaf on backward().
  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, {}});
    return Var{this, nodes_.size() - 1};
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Append the result of an op. The node needs a gradient only if some
  /// parent does; otherwise the backward rule is dropped.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
    bool needs = false;
    for (const Var& p : parents) {
      check_owned(p);
      needs = needs || nodes_[p.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(fn) : BackwardFn{}});
    return Var{this, nodes_.size() - 1};
  }

  const Tensor& value(Var v) const {
    check_owned(v);
    return nodes_[v.id].value;
  }

  bool requires_grad(Var v) const {
    check_owned(v);
    return nodes_[v.id].requires_grad;
  }

  /// Accumulated gradient; zeros if nothing reached this node.
  Tensor grad(Var v) const {
    check_owned(v);
    const Node& n = nodes_[v.id];
    return n.grad.defined() ? n.grad : Tensor(n.value.shape());
  }

  /// Adds `g` into the gradient slot of `v` (allocated on first use).
  void accumulate(Var v, const Tensor& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.grad.defined()) {
      require_same_shape(n.value, g, "accumulate");
      n.grad = g;
    } else {
      add_inplace(n.grad, g);
    }
  }

  void accumulate(Var v, Tensor&& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.grad.defined()) {
      require_same_shape(n.value, g, "accumulate");
      n.grad = std::move(g);
    } else {
      add_inplace(n.grad, g);
    }
  }

  /// Propagate d(loss)/d(node) to every node that requires it.
  void backward(Var loss) {
    check_owned(loss);
    if (backward_done_) throw Error("backward: already run on this tape; call reset_gradients() first");
    const Tensor& lv = nodes_[loss.id].value;
    if (lv.size() != 1 || lv.rank() != 1) throw ShapeError("backward: loss must be a scalar of shape [1]");
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = Tensor(Shape{1}, 1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.defined()) n.backward(*this, n.grad);
    }
  }

  void reset_gradients() {
    for (auto& n : nodes_) n.grad = Tensor{};
    backward_done_ = false;
  }

  void clear() {
    nodes_.clear();
    backward_done_ = false;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad;
    BackwardFn backward;
  };

  void check_owned(Var v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw ValueError("Var does not belong to this tape");
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

namespace ad {

namespace detail {
inline Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) throw ValueError("operands live on different tapes");
  return *a.tape;
}
inline Tensor scalar(double v) { return Tensor(Shape{1}, v); }
}  // namespace detail

inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  return t.record(ew_add(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  return t.record(ew_sub(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, s2dip::scale(g, -1.0));
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  return t.record(ew_mul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, ew_mul(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, ew_mul(g, t.value(a)));
  });
}

inline Var scale(Var a, double c) {
  return a.tape->record(s2dip::scale(a.value(), c), {a},
                        [a, c](Tape& t, const Tensor& g) { t.accumulate(a, s2dip::scale(g, c)); });
}

inline Var sum(Var a) {
  return a.tape->record(detail::scalar(s2dip::sum(a.value())), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a, Tensor(t.value(a).shape(), g[0]));
  });
}

/// Sum of |x|. The subgradient at exactly zero is taken as 0.
inline Var sum_abs(Var a) {
  return a.tape->record(detail::scalar(s2dip::sum_abs(a.value())), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? g[0] : (x[i] < 0.0 ? -g[0] : 0.0);
    t.accumulate(a, std::move(gx));
  });
}

inline Var sum_sq(Var a) {
  return a.tape->record(detail::scalar(s2dip::sum_sq(a.value())), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a, s2dip::scale(t.value(a), 2.0 * g[0]));
  });
}

inline Var slice_shift_diff(Var a, std::size_t axis) {
  const std::size_t n = a.value().extent(axis);
  return a.tape->record(s2dip::slice_shift_diff(a.value(), axis), {a}, [a, axis, n](Tape& t, const Tensor& g) {
    t.accumulate(a, slice_shift_diff_adjoint(g, axis, n));
  });
}

inline Var reshape(Var a, Shape shape) {
  const Shape original = a.shape();
  return a.tape->record(a.value().reshaped(std::move(shape)), {a},
                        [a, original](Tape& t, const Tensor& g) { t.accumulate(a, g.reshaped(original)); });
}

inline Var leaky_relu(Var a, double slope) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  return a.tape->record(std::move(y), {a}, [a, slope](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? g[i] : slope * g[i];
    t.accumulate(a, std::move(gx));
  });
}

inline Var sigmoid(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  const Var out{a.tape, a.tape->size()};  // id the recorded node will get
  return a.tape->record(std::move(y), {a}, [a, out](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(out);
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = g[i] * y[i] * (1.0 - y[i]);
    t.accumulate(a, std::move(gx));
  });
}

/// Shared rule for the three convolution layouts.
inline Var conv(Var x, Var kernel, Var bias, kernels::Taps taps) {
  Tape& t = detail::same_tape(x, kernel);
  detail::same_tape(x, bias);
  return t.record(kernels::conv_forward(x.value(), kernel.value(), bias.value(), taps), {x, kernel, bias},
                  [x, kernel, bias, taps](Tape& t, const Tensor& g) {
                    const bool want_params = t.requires_grad(kernel) || t.requires_grad(bias);
                    auto grads = kernels::conv_backward(t.value(x), t.value(kernel), g, taps,
                                                        t.requires_grad(x), want_params);
                    if (grads.input.defined()) t.accumulate(x, std::move(grads.input));
                    if (grads.kernel.defined()) t.accumulate(kernel, std::move(grads.kernel));
                    if (grads.bias.defined()) t.accumulate(bias, std::move(grads.bias));
                  });
}

/// 3x3 spatial convolution applied to every band slice; kernel [C_out, C_in, 3, 3].
inline Var conv_spatial(Var x, Var kernel, Var bias) { return conv(x, kernel, bias, kernels::Taps::spatial3x3); }

/// 5-tap spectral convolution applied at every pixel; kernel [C_out, C_in, 5].
inline Var conv_spectral(Var x, Var kernel, Var bias) { return conv(x, kernel, bias, kernels::Taps::spectral5); }

/// Channel mixing only; kernel [C_out, C_in].
inline Var conv_pointwise(Var x, Var kernel, Var bias) { return conv(x, kernel, bias, kernels::Taps::pointwise); }

inline Var maxpool2d_per_band(Var x) {
  return x.tape->record(kernels::maxpool2d(x.value()), {x}, [x](Tape& t, const Tensor& g) {
    t.accumulate(x, kernels::maxpool2d_backward(t.value(x), g));
  });
}

inline Var upsample2d_per_band(Var x) {
  return x.tape->record(kernels::upsample2d(x.value()), {x},
                        [x](Tape& t, const Tensor& g) { t.accumulate(x, kernels::upsample2d_backward(g)); });
}

inline Var concat_channels(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  return t.record(kernels::concat_channels(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const std::size_t na = t.value(a).size();
    if (t.requires_grad(a)) {
      t.accumulate(a, Tensor(t.value(a).shape(), std::vector<double>(g.raw(), g.raw() + na)));
    }
    if (t.requires_grad(b)) {
      t.accumulate(b, Tensor(t.value(b).shape(), std::vector<double>(g.raw() + na, g.raw() + g.size())));
    }
  });
}

inline Var crop_spatial(Var x, std::size_t h_keep, std::size_t w_keep) {
  const Shape in_shape = x.shape();
  return x.tape->record(kernels::crop_spatial(x.value(), h_keep, w_keep), {x},
                        [x, in_shape](Tape& t, const Tensor& g) {
                          t.accumulate(x, kernels::crop_spatial_adjoint(g, in_shape));
                        });
}

}  // namespace ad
}  // namespace s2dip
