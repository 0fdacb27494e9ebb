#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "s2dip/autodiff.hpp"

namespace gradcheck {

using s2dip::Tape;
using s2dip::Tensor;
using s2dip::Var;

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Largest elementwise relative error between tape gradients and central
/// differences, over entries whose finite difference exceeds `floor`.
inline double worst_relative_error(const Builder& build, std::vector<Tensor> inputs, double h = 1e-5,
                                   double floor = 1e-6) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
  tape.backward(build(tape, leaves));
  std::vector<Tensor> analytic;
  for (const auto& v : leaves) analytic.push_back(tape.grad(v));

  auto eval = [&](const std::vector<Tensor>& in) {
    Tape t;
    std::vector<Var> ls;
    for (const auto& x : in) ls.push_back(t.leaf(x));
    return build(t, ls).value()[0];
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double keep = inputs[k][i];
      inputs[k][i] = keep + h;
      const double up = eval(inputs);
      inputs[k][i] = keep - h;
      const double down = eval(inputs);
      inputs[k][i] = keep;
      const double fd = (up - down) / (2 * h);
      if (std::abs(fd) <= floor) continue;
      worst = std::max(worst, std::abs(analytic[k][i] - fd) / std::abs(fd));
    }
  return worst;
}

}  // namespace gradcheck
