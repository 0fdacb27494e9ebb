#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "s2dip/error.hpp"
#include "s2dip/network.hpp"
#include "s2dip/tensor.hpp"

namespace s2dip {

struct AdamOptions {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamOptions&, const AdamOptions&) = default;
};

/// Moments and step counter for one ParamSet. Moments are allocated on the
/// first step to match the registry they are applied to.
struct AdamState {
  AdamOptions options;
  std::size_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  explicit AdamState(AdamOptions opts) : options(opts) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected ADAM update from the gradients stored in `params`.
/// Gradients are left in place; the caller zeroes them.
inline void step(ParamSet& params, AdamState& state) {
  const auto& o = state.options;
  if (state.t == 0) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameter registry");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.grad.defined() || p.grad.shape() != p.value.shape()) {
      throw ValueError("adam: missing gradient for parameter '" + p.name + "'");
    }
    if (state.m[i].shape() != p.value.shape()) throw ShapeError("adam: moment shape mismatch for '" + p.name + "'");
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    double* theta = p.value.raw();
    const double* g = p.grad.raw();
    double* m = state.m[i].raw();
    double* v = state.v[i].raw();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      theta[k] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace s2dip
