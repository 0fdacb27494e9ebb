#pragma once

// Eager compute kernels on feature maps laid out as [C, H, W, B].
// Forward and adjoint pairs; autodiff wires them together.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "s2dip/tensor.hpp"

namespace s2dip::kernels {

/// Reflect an index into [0, n) without repeating the edge sample.
/// Works for arbitrarily large overhang; n == 1 maps everything to 0.
constexpr std::size_t reflect(std::ptrdiff_t i, std::size_t n) noexcept {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

namespace detail {

typedef double v8d __attribute__((vector_size(64), aligned(8)));

inline constexpr std::size_t kMR = 8;    // rows per micro-tile
inline constexpr std::size_t kNR = 16;   // columns per micro-tile (two 8-wide vectors)
inline constexpr std::size_t kKC = 64;   // depth of one packed panel

// c[0:mr, 0:nr] (+)= a_panel * b_panel over kc steps. Panels are zero-padded
// to full tile size; only the valid corner of C is touched.
inline void micro_kernel(std::size_t kc, const double* __restrict__ a, const double* __restrict__ b,
                         double* __restrict__ c, std::size_t ldc, std::size_t mr, std::size_t nr) {
  v8d acc[kMR][2];
  if (mr == kMR && nr == kNR) {
    for (std::size_t i = 0; i < kMR; ++i) {
      acc[i][0] = *reinterpret_cast<const v8d*>(c + i * ldc);
      acc[i][1] = *reinterpret_cast<const v8d*>(c + i * ldc + 8);
    }
  } else {
    alignas(64) double tmp[kMR][kNR] = {};
    for (std::size_t i = 0; i < mr; ++i)
      for (std::size_t j = 0; j < nr; ++j) tmp[i][j] = c[i * ldc + j];
    for (std::size_t i = 0; i < kMR; ++i) {
      acc[i][0] = *reinterpret_cast<const v8d*>(&tmp[i][0]);
      acc[i][1] = *reinterpret_cast<const v8d*>(&tmp[i][8]);
    }
  }
  for (std::size_t k = 0; k < kc; ++k) {
    const v8d b0 = *reinterpret_cast<const v8d*>(b + k * kNR);
    const v8d b1 = *reinterpret_cast<const v8d*>(b + k * kNR + 8);
    const double* ak = a + k * kMR;
    for (std::size_t i = 0; i < kMR; ++i) {
      acc[i][0] += ak[i] * b0;
      acc[i][1] += ak[i] * b1;
    }
  }
  if (mr == kMR && nr == kNR) {
    for (std::size_t i = 0; i < kMR; ++i) {
      *reinterpret_cast<v8d*>(c + i * ldc) = acc[i][0];
      *reinterpret_cast<v8d*>(c + i * ldc + 8) = acc[i][1];
    }
  } else {
    alignas(64) double tmp[kMR][kNR];
    for (std::size_t i = 0; i < kMR; ++i) {
      *reinterpret_cast<v8d*>(&tmp[i][0]) = acc[i][0];
      *reinterpret_cast<v8d*>(&tmp[i][8]) = acc[i][1];
    }
    for (std::size_t i = 0; i < mr; ++i)
      for (std::size_t j = 0; j < nr; ++j) c[i * ldc + j] = tmp[i][j];
  }
}

}  // namespace detail

// Blocked GEMM driver. A is addressed through strides; B is filled into
// kKC x kNR panels by `pack_b(k0, kc, n0, nr, dst)`, which lets callers feed
// shifted or transposed views without materializing them.
template <typename PackB>
void gemm_core(std::size_t M, std::size_t N, std::size_t K, const double* A, std::size_t a_rs, std::size_t a_cs,
               PackB&& pack_b, double* C, std::size_t ldc) {
  using detail::kKC;
  using detail::kMR;
  using detail::kNR;
  if (M == 0 || N == 0 || K == 0) return;
  const std::size_t m_blocks = (M + kMR - 1) / kMR;
  std::vector<double> a_pack(m_blocks * kKC * kMR);
  std::vector<double> b_pack(kKC * kNR);
  for (std::size_t k0 = 0; k0 < K; k0 += kKC) {
    const std::size_t kc = std::min(kKC, K - k0);
    for (std::size_t mb = 0; mb < m_blocks; ++mb)
      for (std::size_t k = 0; k < kc; ++k)
        for (std::size_t i = 0; i < kMR; ++i) {
          const std::size_t m = mb * kMR + i;
          a_pack[(mb * kKC + k) * kMR + i] = m < M ? A[m * a_rs + (k0 + k) * a_cs] : 0.0;
        }
    for (std::size_t n0 = 0; n0 < N; n0 += kNR) {
      const std::size_t nr = std::min(kNR, N - n0);
      pack_b(k0, kc, n0, nr, b_pack.data());
      for (std::size_t mb = 0; mb < m_blocks; ++mb) {
        const std::size_t mr = std::min(kMR, M - mb * kMR);
        detail::micro_kernel(kc, a_pack.data() + mb * kKC * kMR, b_pack.data(), C + mb * kMR * ldc + n0, ldc, mr,
                             nr);
      }
    }
  }
}

/// B(k, n) = rows[k][n]: every row of B is a contiguous run somewhere in memory.
inline auto pack_rows(const double* const* rows) {
  return [rows](std::size_t k0, std::size_t kc, std::size_t n0, std::size_t nr, double* dst) {
    for (std::size_t k = 0; k < kc; ++k, dst += detail::kNR) {
      const double* src = rows[k0 + k] + n0;
      std::size_t j = 0;
      for (; j < nr; ++j) dst[j] = src[j];
      for (; j < detail::kNR; ++j) dst[j] = 0.0;
    }
  };
}

/// B(k, n) = rows[k][idx[n]]: pack_rows restricted to selected columns.
inline auto pack_rows_at(const double* const* rows, const std::size_t* idx) {
  return [rows, idx](std::size_t k0, std::size_t kc, std::size_t n0, std::size_t nr, double* dst) {
    const std::size_t* at = idx + n0;
    for (std::size_t k = 0; k < kc; ++k, dst += detail::kNR) {
      const double* src = rows[k0 + k];
      std::size_t j = 0;
      for (; j < nr; ++j) dst[j] = src[at[j]];
      for (; j < detail::kNR; ++j) dst[j] = 0.0;
    }
  };
}

/// B(k, n) = cols[n][idx[k]]: pack_cols restricted to selected rows.
inline auto pack_cols_at(const double* const* cols, const std::size_t* idx) {
  return [cols, idx](std::size_t k0, std::size_t kc, std::size_t n0, std::size_t nr, double* dst) {
    const std::size_t* at = idx + k0;
    for (std::size_t j = 0; j < detail::kNR; ++j) {
      if (j < nr) {
        const double* src = cols[n0 + j];
        for (std::size_t k = 0; k < kc; ++k) dst[k * detail::kNR + j] = src[at[k]];
      } else {
        for (std::size_t k = 0; k < kc; ++k) dst[k * detail::kNR + j] = 0.0;
      }
    }
  };
}

/// C[M,N] += A[M,K] * B[K,N], all row-major. Every output element
/// accumulates its products in increasing k order starting from its current
/// value, so the result does not depend on the blocking.
inline void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  std::vector<const double*> rows(K);
  for (std::size_t k = 0; k < K; ++k) rows[k] = B + k * N;
  gemm_core(M, N, K, A, K, 1, pack_rows(rows.data()), C, N);
}

struct FeatureDims {
  std::size_t channels, height, width, bands;

  std::size_t plane() const noexcept { return height * width * bands; }
};

inline FeatureDims feature_dims(const Tensor& x, const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + ": expected [C,H,W,B], got " + to_string(x.shape()));
  return {x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]};
}

/// Receptive-field layout of a convolution: which taps contribute to an output.
enum class Taps { spatial3x3, spectral5, pointwise };

constexpr std::size_t tap_count(Taps taps) noexcept {
  switch (taps) {
    case Taps::spatial3x3: return 9;
    case Taps::spectral5: return 5;
    case Taps::pointwise: return 1;
  }
  return 0;
}

// The input is reflect-padded once into [C, Hp, Wp, Bp]. An output at
// (h, w, b) then sits at q = (h*Wp + w)*Bp + b on a "wide" grid sharing the
// padded strides, and each tap reads the padded plane at q + offset[tap].
// GEMMs gather only the valid q; the input gradient runs over the whole
// padded plane with zeros at the other positions.
struct ConvGeometry {
  FeatureDims in;
  std::size_t ph = 0, pw = 0, pb = 0;
  std::size_t Hp = 0, Wp = 0, Bp = 0;
  std::vector<std::size_t> offsets;  // one per tap, kernel order

  ConvGeometry(const FeatureDims& d, Taps taps) : in(d) {
    if (taps == Taps::spatial3x3) ph = pw = 1;
    if (taps == Taps::spectral5) pb = 2;
    Hp = d.height + 2 * ph;
    Wp = d.width + 2 * pw;
    Bp = d.bands + 2 * pb;
    for (std::size_t i = 0; i <= 2 * ph; ++i)
      for (std::size_t j = 0; j <= 2 * pw; ++j)
        for (std::size_t t = 0; t <= 2 * pb; ++t) offsets.push_back((i * Wp + j) * Bp + t);
  }

  std::size_t padded_plane() const noexcept { return Hp * Wp * Bp; }
  std::size_t taps() const noexcept { return offsets.size(); }

  template <typename F>
  void for_each_output(F&& f) const {  // f(compact index, wide index, run length)
    for (std::size_t h = 0; h < in.height; ++h)
      for (std::size_t w = 0; w < in.width; ++w)
        f((h * in.width + w) * in.bands, (h * Wp + w) * Bp, in.bands);
  }

  /// Wide index of every output, in compact order.
  std::vector<std::size_t> output_positions() const {
    std::vector<std::size_t> idx(in.plane());
    for_each_output([&](std::size_t i, std::size_t q, std::size_t len) {
      for (std::size_t b = 0; b < len; ++b) idx[i + b] = q + b;
    });
    return idx;
  }

  std::vector<double> pad(const double* x) const {
    std::vector<double> out(in.channels * padded_plane());
    double* o = out.data();
    for (std::size_t c = 0; c < in.channels; ++c) {
      const double* src = x + c * in.plane();
      for (std::size_t h = 0; h < Hp; ++h) {
        const std::size_t hs = reflect(static_cast<std::ptrdiff_t>(h) - static_cast<std::ptrdiff_t>(ph), in.height);
        for (std::size_t w = 0; w < Wp; ++w, o += Bp) {
          const std::size_t ws = reflect(static_cast<std::ptrdiff_t>(w) - static_cast<std::ptrdiff_t>(pw), in.width);
          const double* s = src + (hs * in.width + ws) * in.bands;
          std::copy_n(s, in.bands, o + pb);
          for (std::size_t e = 0; e < pb; ++e) {
            o[e] = s[reflect(static_cast<std::ptrdiff_t>(e) - static_cast<std::ptrdiff_t>(pb), in.bands)];
            o[pb + in.bands + e] = s[reflect(static_cast<std::ptrdiff_t>(in.bands + e), in.bands)];
          }
        }
      }
    }
    return out;
  }

  void pad_adjoint(const std::vector<double>& gp, double* gx) const {
    const double* g = gp.data();
    for (std::size_t c = 0; c < in.channels; ++c) {
      double* dst = gx + c * in.plane();
      for (std::size_t h = 0; h < Hp; ++h) {
        const std::size_t hs = reflect(static_cast<std::ptrdiff_t>(h) - static_cast<std::ptrdiff_t>(ph), in.height);
        for (std::size_t w = 0; w < Wp; ++w, g += Bp) {
          const std::size_t ws = reflect(static_cast<std::ptrdiff_t>(w) - static_cast<std::ptrdiff_t>(pw), in.width);
          double* d = dst + (hs * in.width + ws) * in.bands;
          for (std::size_t b = 0; b < in.bands; ++b) d[b] += g[pb + b];
          for (std::size_t e = 0; e < pb; ++e) {
            d[reflect(static_cast<std::ptrdiff_t>(e) - static_cast<std::ptrdiff_t>(pb), in.bands)] += g[e];
            d[reflect(static_cast<std::ptrdiff_t>(in.bands + e), in.bands)] += g[pb + in.bands + e];
          }
        }
      }
    }
  }

  /// Row pointers into the padded input, ordered (channel, tap) like the kernel columns.
  std::vector<const double*> tap_rows(const double* padded) const {
    std::vector<const double*> rows;
    rows.reserve(in.channels * taps());
    for (std::size_t c = 0; c < in.channels; ++c)
      for (std::size_t off : offsets) rows.push_back(padded + c * padded_plane() + off);
    return rows;
  }
};

// Kernel tensors are [C_out, C_in, taps...]; viewed here as [C_out, C_in*taps].
inline void check_conv_operands(const FeatureDims& d, const Tensor& kernel, const Tensor& bias, Taps taps,
                                const char* op) {
  if (kernel.rank() < 2 || kernel.shape()[1] != d.channels ||
      kernel.size() != kernel.shape()[0] * d.channels * tap_count(taps)) {
    throw ShapeError(std::string(op) + ": kernel " + to_string(kernel.shape()) + " incompatible with " +
                     std::to_string(d.channels) + " input channels");
  }
  if (bias.rank() != 1 || bias.shape()[0] != kernel.shape()[0]) {
    throw ShapeError(std::string(op) + ": bias must have shape [C_out]");
  }
}

/// out[co] = bias[co] + sum_{ci, tap} kernel[co, ci, tap] * x_pad[ci, tap-shifted].
inline Tensor conv_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, Taps taps) {
  const auto d = feature_dims(x, "conv");
  check_conv_operands(d, kernel, bias, taps, "conv");
  const ConvGeometry geo(d, taps);
  const std::size_t co = kernel.shape()[0], r = d.channels * geo.taps();
  const auto padded = geo.pad(x.raw());
  const auto rows = geo.tap_rows(padded.data());
  const auto at = geo.output_positions();
  const std::size_t n = d.plane();
  Tensor out(Shape{co, d.height, d.width, d.bands});
  for (std::size_t c = 0; c < co; ++c) std::fill_n(out.raw() + c * n, n, bias[c]);
  gemm_core(co, n, r, kernel.raw(), r, 1, pack_rows_at(rows.data(), at.data()), out.raw(), n);
  return out;
}

struct ConvGrads {
  Tensor input, kernel, bias;
};

/// Gradients of conv_forward given the upstream gradient `g_out`.
/// Undefined members are skipped when the matching `want_*` flag is false.
inline ConvGrads conv_backward(const Tensor& x, const Tensor& kernel, const Tensor& g_out, Taps taps,
                               bool want_input, bool want_params) {
  const auto d = feature_dims(x, "conv_backward");
  const ConvGeometry geo(d, taps);
  const std::size_t co = kernel.shape()[0], r = d.channels * geo.taps();

  ConvGrads grads;
  if (want_params) {
    grads.bias = Tensor(Shape{co});
    for (std::size_t c = 0; c < co; ++c) {
      const double* g = g_out.raw() + c * d.plane();
      double s = 0.0;
      for (std::size_t k = 0; k < d.plane(); ++k) s += g[k];
      grads.bias[c] = s;
    }
    // dK[co, (ci,tap)] = sum_n g_out[co, n] * x_pad[ci, at[n] + offset[tap]]
    const auto padded = geo.pad(x.raw());
    const auto rows = geo.tap_rows(padded.data());
    const auto at = geo.output_positions();
    grads.kernel = Tensor(kernel.shape());
    gemm_core(co, r, d.plane(), g_out.raw(), d.plane(), 1, pack_cols_at(rows.data(), at.data()),
              grads.kernel.raw(), r);
  }
  if (want_input) {
    // dx_pad[ci, p] = sum_{co, tap} kernel[co, ci, tap] * g_wide[co, p - offset[tap]], as one GEMM
    // over the padded plane. g_wide sits behind a zero margin so every shifted read stays in bounds.
    const std::size_t margin = geo.offsets.back(), plane = geo.padded_plane(), ext = margin + plane;
    std::vector<double> g_ext(co * ext, 0.0);
    for (std::size_t c = 0; c < co; ++c) {
      const double* src = g_out.raw() + c * d.plane();
      double* dst = g_ext.data() + c * ext + margin;
      geo.for_each_output([&](std::size_t i, std::size_t q, std::size_t len) { std::copy_n(src + i, len, dst + q); });
    }
    const std::size_t rk = co * geo.taps();
    std::vector<const double*> g_rows(rk);
    std::vector<double> kt(d.channels * rk);  // [ci, (co, tap)]
    for (std::size_t c = 0; c < co; ++c)
      for (std::size_t t = 0; t < geo.taps(); ++t) {
        g_rows[c * geo.taps() + t] = g_ext.data() + c * ext + margin - geo.offsets[t];
        for (std::size_t ci = 0; ci < d.channels; ++ci)
          kt[ci * rk + c * geo.taps() + t] = kernel.raw()[(c * d.channels + ci) * geo.taps() + t];
      }
    std::vector<double> gp(d.channels * plane, 0.0);
    gemm_core(d.channels, plane, rk, kt.data(), rk, 1, pack_rows(g_rows.data()), gp.data(), plane);
    grads.input = Tensor(x.shape());
    geo.pad_adjoint(gp, grads.input.raw());
  }
  return grads;
}

/// 2x2 stride-2 max pooling over (H, W), independently per channel and band.
inline Tensor maxpool2d(const Tensor& x) {
  const auto d = feature_dims(x, "maxpool2d_per_band");
  if (d.height % 2 || d.width % 2) {
    throw ShapeError("maxpool2d_per_band: spatial extents must be even, got " + to_string(x.shape()));
  }
  const std::size_t H2 = d.height / 2, W2 = d.width / 2, B = d.bands;
  Tensor out(Shape{d.channels, H2, W2, B});
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t h = 0; h < H2; ++h)
      for (std::size_t w = 0; w < W2; ++w)
        for (std::size_t b = 0; b < B; ++b) {
          double m = x.at(c, 2 * h, 2 * w, b);
          m = std::max(m, x.at(c, 2 * h, 2 * w + 1, b));
          m = std::max(m, x.at(c, 2 * h + 1, 2 * w, b));
          m = std::max(m, x.at(c, 2 * h + 1, 2 * w + 1, b));
          out[((c * H2 + h) * W2 + w) * B + b] = m;
        }
  return out;
}

/// Routes each pooled gradient to the first maximal element of its window.
inline Tensor maxpool2d_backward(const Tensor& x, const Tensor& g_out) {
  const auto d = feature_dims(x, "maxpool2d_backward");
  const std::size_t H2 = d.height / 2, W2 = d.width / 2, B = d.bands;
  Tensor gx(x.shape());
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t h = 0; h < H2; ++h)
      for (std::size_t w = 0; w < W2; ++w)
        for (std::size_t b = 0; b < B; ++b) {
          std::size_t best_h = 2 * h, best_w = 2 * w;
          double m = x.at(c, best_h, best_w, b);
          for (std::size_t k = 1; k < 4; ++k) {
            const std::size_t hh = 2 * h + k / 2, ww = 2 * w + k % 2;
            if (x.at(c, hh, ww, b) > m) {
              m = x.at(c, hh, ww, b);
              best_h = hh;
              best_w = ww;
            }
          }
          gx.at(c, best_h, best_w, b) += g_out[((c * H2 + h) * W2 + w) * B + b];
        }
  return gx;
}

/// Nearest-neighbour 2x upsampling over (H, W).
inline Tensor upsample2d(const Tensor& x) {
  const auto d = feature_dims(x, "upsample2d_per_band");
  const std::size_t H = d.height, W = d.width, B = d.bands;
  Tensor out(Shape{d.channels, 2 * H, 2 * W, B});
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t h = 0; h < 2 * H; ++h)
      for (std::size_t w = 0; w < 2 * W; ++w)
        std::copy_n(x.raw() + ((c * H + h / 2) * W + w / 2) * B, B, out.raw() + ((c * 2 * H + h) * 2 * W + w) * B);
  return out;
}

inline Tensor upsample2d_backward(const Tensor& g_out) {
  const auto d = feature_dims(g_out, "upsample2d_backward");
  const std::size_t H = d.height / 2, W = d.width / 2, B = d.bands;
  Tensor gx(Shape{d.channels, H, W, B});
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t h = 0; h < 2 * H; ++h)
      for (std::size_t w = 0; w < 2 * W; ++w) {
        const double* g = g_out.raw() + ((c * 2 * H + h) * 2 * W + w) * B;
        double* o = gx.raw() + ((c * H + h / 2) * W + w / 2) * B;
        for (std::size_t b = 0; b < B; ++b) o[b] += g[b];
      }
  return gx;
}

/// Stack two feature maps along the channel axis.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const auto da = feature_dims(a, "concat_channels");
  const auto db = feature_dims(b, "concat_channels");
  if (da.height != db.height || da.width != db.width || da.bands != db.bands) {
    throw ShapeError("concat_channels: spatial/spectral extents differ: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  Tensor out(Shape{da.channels + db.channels, da.height, da.width, da.bands});
  std::copy_n(a.raw(), a.size(), out.raw());
  std::copy_n(b.raw(), b.size(), out.raw() + a.size());
  return out;
}

/// Reflect-pad the spatial axes of a [C,H,W,B] map up to (h_to, w_to), padding
/// after the existing rows/columns.
inline Tensor reflect_pad_spatial(const Tensor& x, std::size_t h_to, std::size_t w_to) {
  const auto d = feature_dims(x, "reflect_pad_spatial");
  if (h_to < d.height || w_to < d.width) throw ShapeError("reflect_pad_spatial: target smaller than input");
  Tensor out(Shape{d.channels, h_to, w_to, d.bands});
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t h = 0; h < h_to; ++h)
      for (std::size_t w = 0; w < w_to; ++w) {
        const std::size_t hs = reflect(static_cast<std::ptrdiff_t>(h), d.height);
        const std::size_t ws = reflect(static_cast<std::ptrdiff_t>(w), d.width);
        std::copy_n(x.raw() + ((c * d.height + hs) * d.width + ws) * d.bands, d.bands,
                    out.raw() + ((c * h_to + h) * w_to + w) * d.bands);
      }
  return out;
}

/// Keep the leading (h, w) spatial window of a [C,H,W,B] map.
inline Tensor crop_spatial(const Tensor& x, std::size_t h_keep, std::size_t w_keep) {
  const auto d = feature_dims(x, "crop_spatial");
  if (h_keep > d.height || w_keep > d.width || h_keep == 0 || w_keep == 0) {
    throw ShapeError("crop_spatial: window exceeds input");
  }
  Tensor out(Shape{d.channels, h_keep, w_keep, d.bands});
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t h = 0; h < h_keep; ++h)
      std::copy_n(x.raw() + ((c * d.height + h) * d.width) * d.bands, w_keep * d.bands,
                  out.raw() + ((c * h_keep + h) * w_keep) * d.bands);
  return out;
}

inline Tensor crop_spatial_adjoint(const Tensor& g, const Shape& input_shape) {
  const auto d = feature_dims(g, "crop_spatial_adjoint");
  Tensor out(input_shape);
  const std::size_t H = input_shape[1], W = input_shape[2];
  for (std::size_t c = 0; c < d.channels; ++c)
    for (std::size_t h = 0; h < d.height; ++h)
      std::copy_n(g.raw() + ((c * d.height + h) * d.width) * d.bands, d.width * d.bands,
                  out.raw() + ((c * H + h) * W) * d.bands);
  return out;
}

}  // namespace s2dip::kernels
