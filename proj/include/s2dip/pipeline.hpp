#pragma once

// Single-image optimization loop:
//
//   draw network input Z ~ U[0, 0.1] once
//   for k = 1, 2, ...:
//     O_k = f(Z); L = total_loss(O_k, Y)
//     check the stopping rule on O_k; stop -> O_k is the result
//     backward, ADAM step, zero gradients
//
// The stopping rule compares O_k against the output of the previous check
// every `check_interval` iterations (check points k = 1 + m * interval) and
// stops at the first check whose relative change is below `relerr_tol`, or
// at k == k_max.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "s2dip/adam.hpp"
#include "s2dip/autodiff.hpp"
#include "s2dip/cube.hpp"
#include "s2dip/error.hpp"
#include "s2dip/loss.hpp"
#include "s2dip/metrics.hpp"
#include "s2dip/network.hpp"
#include "s2dip/rng.hpp"

namespace s2dip {

struct StopConfig {
  double relerr_tol = 0.01;
  std::size_t k_max = 7000;
  std::size_t check_interval = 100;

  void validate() const {
    if (!(relerr_tol > 0.0)) throw ValueError("relerr tolerance must be > 0");
    if (k_max < 1) throw ValueError("k_max must be >= 1");
    if (check_interval < 1) throw ValueError("check_interval must be >= 1");
  }

  friend bool operator==(const StopConfig&, const StopConfig&) = default;
};

enum class StopReason { tolerance, max_iterations };

inline const char* to_string(StopReason r) {
  return r == StopReason::tolerance ? "tolerance" : "max-iterations";
}

/// ||next - prev||_2 / ||prev||_2
inline double rel_err(const Cube& next, const Cube& prev) {
  require_same_shape(next, prev, "rel_err");
  double num = 0.0, den = 0.0;
  const auto a = next.data();
  const auto b = prev.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    num += d * d;
    den += b[i] * b[i];
  }
  if (den == 0.0) throw ValueError("rel_err: previous output has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

/// Decides when the loop ends. Feed it the output of every iteration in order.
class StoppingRule {
 public:
  explicit StoppingRule(StopConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  bool is_check_point(std::size_t k) const noexcept { return k > 1 && (k - 1) % cfg_.check_interval == 0; }

  /// Returns the reason to stop at iteration k, if any.
  std::optional<StopReason> observe(std::size_t k, const Cube& output) {
    if (k != last_k_ + 1) throw ValueError("StoppingRule: iterations must be observed consecutively from 1");
    last_k_ = k;
    last_rel_err_.reset();
    if (k == 1) {
      reference_ = output;
    } else if (is_check_point(k)) {
      last_rel_err_ = rel_err(output, *reference_);
      reference_ = output;
      if (*last_rel_err_ < cfg_.relerr_tol) return StopReason::tolerance;
    }
    if (k >= cfg_.k_max) return StopReason::max_iterations;
    return std::nullopt;
  }

  /// RelErr computed by the most recent observe() call, if it was a check point.
  std::optional<double> last_rel_err() const noexcept { return last_rel_err_; }
  const StopConfig& config() const noexcept { return cfg_; }

 private:
  StopConfig cfg_;
  std::size_t last_k_ = 0;
  std::optional<Cube> reference_;
  std::optional<double> last_rel_err_;
};

struct RunConfig {
  NetworkConfig network;
  double lambda_over_n = 0.4;  // lambda = lambda_over_n / (H * W * B)
  double alpha1 = 0.01;
  double alpha2 = 1.0;
  StopConfig stop;
  double lr = 0.0005;
  std::uint64_t seed = 0;
  std::optional<Cube> trace_reference;

  LossWeights weights_for(std::size_t voxels) const {
    return LossWeights{lambda_over_n / static_cast<double>(voxels), alpha1, alpha2};
  }

  void validate() const {
    network.validate();
    stop.validate();
    LossWeights{lambda_over_n, alpha1, alpha2}.validate();
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValueError("learning rate must be finite and > 0");
  }
};

struct RelErrCheck {
  std::size_t iteration;
  double value;

  friend bool operator==(const RelErrCheck&, const RelErrCheck&) = default;
};

struct RunReport {
  StopReason stop_reason = StopReason::max_iterations;
  std::size_t iterations = 0;
  std::vector<double> loss;             // one entry per iteration
  std::vector<double> psnr;             // per iteration, only with a trace reference
  std::vector<RelErrCheck> rel_err;     // one entry per check point
  double wall_seconds = 0.0;
  Cube output{1, 1, 1};
  std::optional<Cube> best_output;      // best-PSNR iterate, only with a trace reference
  std::size_t best_iteration = 0;
  double best_psnr = -std::numeric_limits<double>::infinity();
};

struct IterationInfo {
  std::size_t iteration;
  double loss;
  std::optional<double> rel_err;
  std::optional<double> psnr;
};

using ProgressFn = std::function<void(const IterationInfo&)>;

inline void require_finite(const Cube& y, const char* what) {
  for (double v : y.data())
    if (!std::isfinite(v)) throw ValueError(std::string(what) + " contains non-finite values");
}

/// Fit the network to `y` under the regularized loss until the stopping rule fires.
inline RunReport run(const Cube& y, const RunConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  require_finite(y, "input cube");
  if (cfg.trace_reference) require_same_shape(*cfg.trace_reference, y, "trace reference");

  const auto started = std::chrono::steady_clock::now();
  const Rng master(cfg.seed);
  Rng init_rng = master.split(1);
  Rng input_rng = master.split(2);
  Network net = build_network(cfg.network, init_rng);
  const Cube z(uniform(input_rng, y.shape(), 0.0, 0.1));
  const LossWeights weights = cfg.weights_for(y.size());

  AdamState adam(AdamOptions{.lr = cfg.lr});
  StoppingRule rule(cfg.stop);
  RunReport report;
  Tape tape;

  for (std::size_t k = 1;; ++k) {
    tape.clear();
    const ForwardPass pass = forward(tape, net, z);
    const Var loss = total_loss(pass.output, y, weights);
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw NumericalError("non-finite loss at iteration " + std::to_string(k), k);
    }
    report.loss.push_back(loss_value);
    Cube output(pass.output.value());

    IterationInfo info{k, loss_value, std::nullopt, std::nullopt};
    if (cfg.trace_reference) {
      const double p = psnr(*cfg.trace_reference, output);
      report.psnr.push_back(p);
      info.psnr = p;
      if (p > report.best_psnr) {
        report.best_psnr = p;
        report.best_iteration = k;
        report.best_output = output;
      }
    }

    const auto stop = rule.observe(k, output);
    if (rule.last_rel_err()) {
      report.rel_err.push_back({k, *rule.last_rel_err()});
      info.rel_err = rule.last_rel_err();
    }
    if (progress) progress(info);
    if (stop) {
      report.stop_reason = *stop;
      report.iterations = k;
      report.output = std::move(output);
      break;
    }

    tape.backward(loss);
    net.params().zero_grad();
    accumulate_gradients(tape, pass, net.params());
    step(net.params(), adam);
  }

  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

/// Plain deep-image-prior fit: the same loop with the regularizer switched off.
inline RunReport run_dip_baseline(const Cube& y, RunConfig cfg, const ProgressFn& progress = {}) {
  cfg.lambda_over_n = 0.0;
  return run(y, cfg, progress);
}

}  // namespace s2dip
