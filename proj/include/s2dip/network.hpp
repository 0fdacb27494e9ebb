#pragma once

// Separable-3D-convolution encoder-decoder.
//
// Topology for depth D and widths c[0..D-1]:
//   encoder stage s : block(in -> c[s]), block(c[s] -> c[s]), keep skip, maxpool
//   bottleneck      : block(c[D-1] -> c[D-1]) x 2
//   decoder stage s : upsample, concat skip s, block(prev + c[s] -> c[s])   (s = D-1 .. 0)
//   head            : pointwise conv c[0] -> out, sigmoid
//
// A separable block is a 3x3x1 spatial conv followed by a 1x1x5 spectral conv
// and a leaky rectifier. Pooling is spatial only; the band axis keeps its
// full resolution throughout.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "s2dip/autodiff.hpp"
#include "s2dip/cube.hpp"
#include "s2dip/error.hpp"
#include "s2dip/kernels.hpp"
#include "s2dip/rng.hpp"
#include "s2dip/tensor.hpp"

namespace s2dip {

struct NetworkConfig {
  std::size_t depth = 3;
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t input_channels = 1;
  std::size_t output_channels = 1;
  double leaky_slope = 0.1;

  void validate() const {
    if (depth < 1) throw ValueError("network depth must be >= 1");
    if (channels.size() != depth) {
      throw ValueError("network needs one channel width per encoder stage (" + std::to_string(depth) +
                       "), got " + std::to_string(channels.size()));
    }
    for (auto c : channels)
      if (c == 0) throw ValueError("channel widths must be >= 1");
    if (input_channels == 0 || output_channels == 0) throw ValueError("input/output channels must be >= 1");
    if (!(leaky_slope >= 0.0) || !std::isfinite(leaky_slope)) throw ValueError("leaky slope must be finite and >= 0");
    if (depth >= 16) throw ValueError("network depth too large");
  }

  /// Spatial extents are padded to a multiple of this before the forward pass.
  std::size_t spatial_multiple() const { return std::size_t{1} << depth; }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

enum class BlockKind { separable, full3d };

// ---------------------------------------------------------------------------
// Parameter counting

constexpr std::size_t separable_block_parameters(std::size_t c_in, std::size_t c_out) {
  const std::size_t c_mid = c_out;
  return 9 * c_in * c_mid + c_mid + 5 * c_mid * c_out + c_out;
}

constexpr std::size_t full3d_block_parameters(std::size_t c_in, std::size_t c_out) {
  return 27 * c_in * c_out + c_out;
}

/// Closed-form parameter total for the topology above.
inline std::size_t closed_form_parameter_count(const NetworkConfig& cfg, BlockKind kind) {
  cfg.validate();
  auto block = [kind](std::size_t ci, std::size_t co) {
    return kind == BlockKind::separable ? separable_block_parameters(ci, co) : full3d_block_parameters(ci, co);
  };
  const auto& c = cfg.channels;
  std::size_t total = 0;
  std::size_t in = cfg.input_channels;
  for (std::size_t s = 0; s < cfg.depth; ++s) {
    total += block(in, c[s]) + block(c[s], c[s]);
    in = c[s];
  }
  total += 2 * block(c.back(), c.back());
  std::size_t prev = c.back();
  for (std::size_t s = cfg.depth; s-- > 0;) {
    total += block(prev + c[s], c[s]);
    prev = c[s];
  }
  return total + c.front() * cfg.output_channels + cfg.output_channels;
}

// ---------------------------------------------------------------------------
// Layer plan and parameter registry

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in;
};

/// Ordered registry layout: every kernel and bias, in forward order.
inline std::vector<ParamSpec> parameter_plan(const NetworkConfig& cfg, BlockKind kind = BlockKind::separable) {
  cfg.validate();
  std::vector<ParamSpec> plan;
  auto add_block = [&](const std::string& name, std::size_t ci, std::size_t co) {
    if (kind == BlockKind::separable) {
      plan.push_back({name + ".spatial.kernel", {co, ci, 3, 3}, 9 * ci});
      plan.push_back({name + ".spatial.bias", {co}, 9 * ci});
      plan.push_back({name + ".spectral.kernel", {co, co, 5}, 5 * co});
      plan.push_back({name + ".spectral.bias", {co}, 5 * co});
    } else {
      plan.push_back({name + ".conv3d.kernel", {co, ci, 3, 3, 3}, 27 * ci});
      plan.push_back({name + ".conv3d.bias", {co}, 27 * ci});
    }
  };
  const auto& c = cfg.channels;
  std::size_t in = cfg.input_channels;
  for (std::size_t s = 0; s < cfg.depth; ++s) {
    add_block("enc" + std::to_string(s) + ".a", in, c[s]);
    add_block("enc" + std::to_string(s) + ".b", c[s], c[s]);
    in = c[s];
  }
  add_block("bottleneck.a", c.back(), c.back());
  add_block("bottleneck.b", c.back(), c.back());
  std::size_t prev = c.back();
  for (std::size_t s = cfg.depth; s-- > 0;) {
    add_block("dec" + std::to_string(s), prev + c[s], c[s]);
    prev = c[s];
  }
  plan.push_back({"head.kernel", {cfg.output_channels, c.front()}, c.front()});
  plan.push_back({"head.bias", {cfg.output_channels}, c.front()});
  return plan;
}

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Flat registry of network parameters with their gradient slots.
/// Registration order is fixed at construction.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value) {
    Tensor grad(value.shape());
    params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad)});
    return params_.size() - 1;
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  std::size_t element_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<Parameter> params_;
};

class Network {
 public:
  Network(NetworkConfig cfg, ParamSet params) : cfg_(std::move(cfg)), params_(std::move(params)) {}

  const NetworkConfig& config() const noexcept { return cfg_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

 private:
  NetworkConfig cfg_;
  ParamSet params_;
};

/// Allocate the registry. Kernels are drawn from N(0, gain^2 / fan_in) with
/// gain 1 for convolutions feeding another convolution and the leaky-rectifier
/// gain sqrt(2 / (1 + slope^2)) for those feeding the activation, so feature
/// variance is roughly preserved through every block. Biases start at zero.
inline Network build_network(const NetworkConfig& cfg, Rng& rng) {
  const double act_gain = std::sqrt(2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope));
  ParamSet params;
  for (auto& spec : parameter_plan(cfg)) {
    if (spec.shape.size() == 1) {
      params.add(spec.name, Tensor(spec.shape));
      continue;
    }
    const bool feeds_activation = spec.name.find(".spectral.") != std::string::npos ||
                                  spec.name.find(".conv3d.") != std::string::npos;
    const double gain = feeds_activation ? act_gain : 1.0;
    params.add(spec.name, gaussian(rng, spec.shape, 0.0, gain / std::sqrt(static_cast<double>(spec.fan_in))));
  }
  return Network(cfg, std::move(params));
}

// ---------------------------------------------------------------------------
// Forward pass

struct ForwardPass {
  Var output;               // [C_out, H, W, B]
  std::vector<Var> params;  // leaves, in registry order
};

inline std::size_t round_up(std::size_t n, std::size_t multiple) { return (n + multiple - 1) / multiple * multiple; }

/// Records f(z) on `tape`. `z` is [C_in, H, W, B]; any H, W are accepted and
/// are reflect-padded internally to a multiple of 2^depth, then cropped back.
inline ForwardPass forward(Tape& tape, const Network& net, const Tensor& z) {
  const auto& cfg = net.config();
  const auto d = kernels::feature_dims(z, "forward");
  if (d.channels != cfg.input_channels) {
    throw ShapeError("forward: input has " + std::to_string(d.channels) + " channels, network expects " +
                     std::to_string(cfg.input_channels));
  }
  const std::size_t m = cfg.spatial_multiple();
  const std::size_t hp = round_up(d.height, m), wp = round_up(d.width, m);

  ForwardPass pass;
  pass.params.reserve(net.params().size());
  for (const auto& p : net.params()) pass.params.push_back(tape.leaf(p.value));

  std::size_t next = 0;
  auto take = [&]() -> Var {
    if (next >= pass.params.size()) throw ShapeError("forward: parameter registry does not match configuration");
    return pass.params[next++];
  };
  auto block = [&](Var x) {
    Var k1 = take(), b1 = take(), k2 = take(), b2 = take();
    Var s = ad::conv_spatial(x, k1, b1);
    s = ad::conv_spectral(s, k2, b2);
    return ad::leaky_relu(s, cfg.leaky_slope);
  };

  Var x = tape.constant(hp == d.height && wp == d.width ? z : kernels::reflect_pad_spatial(z, hp, wp));
  std::vector<Var> skips;
  for (std::size_t s = 0; s < cfg.depth; ++s) {
    x = block(x);
    x = block(x);
    skips.push_back(x);
    x = ad::maxpool2d_per_band(x);
  }
  x = block(x);
  x = block(x);
  for (std::size_t s = cfg.depth; s-- > 0;) {
    x = ad::upsample2d_per_band(x);
    x = ad::concat_channels(x, skips[s]);
    x = block(x);
  }
  Var head_k = take(), head_b = take();
  x = ad::sigmoid(ad::conv_pointwise(x, head_k, head_b));
  if (next != pass.params.size()) throw ShapeError("forward: parameter registry does not match configuration");
  if (hp != d.height || wp != d.width) x = ad::crop_spatial(x, d.height, d.width);
  pass.output = x;
  return pass;
}

/// Single-channel convenience: [H, W, B] in, [H, W, B] out as a Var.
inline ForwardPass forward(Tape& tape, const Network& net, const Cube& z) {
  if (net.config().input_channels != 1 || net.config().output_channels != 1) {
    throw ShapeError("forward(Cube): network must have one input and one output channel");
  }
  Tensor lifted = z.tensor().reshaped({1, z.height(), z.width(), z.bands()});
  ForwardPass pass = forward(tape, net, lifted);
  pass.output = ad::reshape(pass.output, z.shape());
  return pass;
}

/// Evaluate the network without keeping the tape.
inline Cube predict(const Network& net, const Cube& z) {
  Tape tape;
  auto pass = forward(tape, net, z);
  return Cube(pass.output.value());
}

/// Add the tape's leaf gradients into the registry's gradient slots.
inline void accumulate_gradients(const Tape& tape, const ForwardPass& pass, ParamSet& params) {
  if (pass.params.size() != params.size()) throw ShapeError("accumulate_gradients: registry size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) add_inplace(params[i].grad, tape.grad(pass.params[i]));
}

}  // namespace s2dip
