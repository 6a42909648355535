// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

// im2col + GEMM convolution. Columns are rebuilt in backward instead of being
// kept alive on the tape.

#include <algorithm>
#include <cstring>

#include "stt/core/autograd.hpp"
#include "stt/nn/layers.hpp"
#include "stt/simd/kernels.hpp"

namespace stt::nn {
namespace {

struct ConvGeometry {
  std::int64_t channels, t, h, w;       // input
  std::int64_t kt, kh, kw;              // kernel
  std::int64_t ot, oh, ow;              // output
  Dims3 stride, padding;

  std::int64_t in_volume() const { return t * h * w; }
  std::int64_t out_volume() const { return ot * oh * ow; }
  std::int64_t taps() const { return kt * kh * kw; }
  std::int64_t col_rows() const { return channels * taps(); }
  bool pointwise() const {
    return taps() == 1 && stride == Dims3{1, 1, 1} && padding == Dims3{0, 0, 0};
  }
};

// cols[(c, a, b, d), (to, ho, wo)] = x[c, to*s + a - p, ...] or 0.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* cols) {
  const std::int64_t ov = g.out_volume();
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const T* xc = x + c * g.in_volume();
    for (std::int64_t a = 0; a < g.kt; ++a) {
      for (std::int64_t b = 0; b < g.kh; ++b) {
        for (std::int64_t d = 0; d < g.kw; ++d, ++row) {
          T* dst = cols + row * ov;
          for (std::int64_t to = 0; to < g.ot; ++to) {
            const std::int64_t ti = to * g.stride[0] - g.padding[0] + a;
            for (std::int64_t ho = 0; ho < g.oh; ++ho) {
              T* out = dst + (to * g.oh + ho) * g.ow;
              const std::int64_t hi = ho * g.stride[1] - g.padding[1] + b;
              if (ti < 0 || ti >= g.t || hi < 0 || hi >= g.h) {
                std::fill(out, out + g.ow, T(0));
                continue;
              }
              const T* src = xc + (ti * g.h + hi) * g.w;
              if (g.stride[2] == 1) {
                const std::int64_t off = d - g.padding[2];
                const std::int64_t lo = std::clamp<std::int64_t>(-off, 0, g.ow);
                const std::int64_t hi_w = std::clamp<std::int64_t>(g.w - off, 0, g.ow);
                std::fill(out, out + lo, T(0));
                if (hi_w > lo) std::memcpy(out + lo, src + lo + off, (hi_w - lo) * sizeof(T));
                std::fill(out + std::max(hi_w, lo), out + g.ow, T(0));
              } else {
                for (std::int64_t wo = 0; wo < g.ow; ++wo) {
                  const std::int64_t wi = wo * g.stride[2] - g.padding[2] + d;
                  out[wo] = (wi >= 0 && wi < g.w) ? src[wi] : T(0);
                }
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: dx += scatter(cols).
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* dx) {
  const std::int64_t ov = g.out_volume();
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    T* xc = dx + c * g.in_volume();
    for (std::int64_t a = 0; a < g.kt; ++a) {
      for (std::int64_t b = 0; b < g.kh; ++b) {
        for (std::int64_t d = 0; d < g.kw; ++d, ++row) {
          const T* src_row = cols + row * ov;
          for (std::int64_t to = 0; to < g.ot; ++to) {
            const std::int64_t ti = to * g.stride[0] - g.padding[0] + a;
            if (ti < 0 || ti >= g.t) continue;
            for (std::int64_t ho = 0; ho < g.oh; ++ho) {
              const std::int64_t hi = ho * g.stride[1] - g.padding[1] + b;
              if (hi < 0 || hi >= g.h) continue;
              const T* in = src_row + (to * g.oh + ho) * g.ow;
              T* dst = xc + (ti * g.h + hi) * g.w;
              for (std::int64_t wo = 0; wo < g.ow; ++wo) {
                const std::int64_t wi = wo * g.stride[2] - g.padding[2] + d;
                if (wi >= 0 && wi < g.w) dst[wi] += in[wo];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& scratch() {
  thread_local std::vector<T> buf;
  return buf;
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Dims3 stride, Dims3 padding) {
  if (x.rank() != 5 || weight.rank() != 5) {
    throw ShapeError("conv3d expects x [N,C,T,H,W] and weight [O,C,kT,kH,kW], got " +
                     shape_str(x.shape()) + " and " + shape_str(weight.shape()));
  }
  if (x.dim(1) != weight.dim(1)) {
    throw ShapeError("conv3d: input has " + std::to_string(x.dim(1)) +
                     " channels, weight expects " + std::to_string(weight.dim(1)));
  }
  const std::int64_t out_c = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{out_c}) {
    throw ShapeError("conv3d: bias shape " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(out_c) + " output channels");
  }
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), x.dim(4),
                 weight.dim(2), weight.dim(3), weight.dim(4), 0, 0, 0, stride, padding};
  const std::int64_t in_ext[3] = {g.t, g.h, g.w};
  const std::int64_t k_ext[3] = {g.kt, g.kh, g.kw};
  std::int64_t out_ext[3];
  for (int i = 0; i < 3; ++i) {
    if (stride[i] <= 0 || padding[i] < 0) throw ShapeError("conv3d: invalid stride/padding");
    if (in_ext[i] + 2 * padding[i] < k_ext[i]) {
      throw ShapeError("conv3d: padded input " + shape_str(x.shape()) +
                       " is smaller than kernel " + shape_str(weight.shape()));
    }
    out_ext[i] = (in_ext[i] + 2 * padding[i] - k_ext[i]) / stride[i] + 1;
  }
  g.ot = out_ext[0];
  g.oh = out_ext[1];
  g.ow = out_ext[2];

  const std::int64_t batch = x.dim(0);
  const std::int64_t ov = g.out_volume();
  const std::int64_t rows = g.col_rows();
  std::vector<T> out(static_cast<std::size_t>(batch * out_c * ov));
  auto& cols = scratch<T>();
  for (std::int64_t n = 0; n < batch; ++n) {
    const T* xn = x.data().data() + n * g.channels * g.in_volume();
    const T* src = xn;
    if (!g.pointwise()) {
      cols.resize(static_cast<std::size_t>(rows * ov));
      im2col(g, xn, cols.data());
      src = cols.data();
    }
    T* on = out.data() + n * out_c * ov;
    simd::gemm<T>(simd::Trans::kNo, simd::Trans::kNo, out_c, ov, rows, T(1),
                  weight.data().data(), rows, src, ov, T(0), on, ov);
    if (bias.defined()) {
      for (std::int64_t o = 0; o < out_c; ++o) {
        const T bv = bias.data()[o];
        T* row = on + o * ov;
        for (std::int64_t i = 0; i < ov; ++i) row[i] += bv;
      }
    }
  }

  std::vector<Tensor<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return autograd::make_result<T>(
      Shape{batch, out_c, g.ot, g.oh, g.ow}, std::move(out), std::move(parents), "conv3d",
      [g, batch, out_c](TensorNode<T>& o) {
        auto gx = autograd::parent_grad(o, 0);
        auto gw = autograd::parent_grad(o, 1);
        auto gb = o.parents.size() > 2 ? autograd::parent_grad(o, 2) : std::span<T>{};
        const T* xv = autograd::parent(o, 0).data.data();
        const T* wv = autograd::parent(o, 1).data.data();
        const std::int64_t ov = g.out_volume();
        const std::int64_t rows = g.col_rows();
        auto& cols = scratch<T>();
        std::vector<T> dcols;
        for (std::int64_t n = 0; n < batch; ++n) {
          const T* go = o.grad.data() + n * out_c * ov;
          if (!gb.empty()) {
            for (std::int64_t oc = 0; oc < out_c; ++oc) {
              T acc = 0;
              const T* row = go + oc * ov;
              for (std::int64_t i = 0; i < ov; ++i) acc += row[i];
              gb[oc] += acc;
            }
          }
          const T* xn = xv + n * g.channels * g.in_volume();
          if (!gw.empty()) {
            const T* src = xn;
            if (!g.pointwise()) {
              cols.resize(static_cast<std::size_t>(rows * ov));
              im2col(g, xn, cols.data());
              src = cols.data();
            }
            // dW[O, R] += dOut[O, P] * cols[R, P]^T
            simd::gemm<T>(simd::Trans::kNo, simd::Trans::kYes, out_c, rows, ov, T(1), go, ov,
                          src, ov, T(1), gw.data(), rows);
          }
          if (!gx.empty()) {
            T* dxn = gx.data() + n * g.channels * g.in_volume();
            if (g.pointwise()) {
              simd::gemm<T>(simd::Trans::kYes, simd::Trans::kNo, rows, ov, out_c, T(1), wv,
                            rows, go, ov, T(1), dxn, ov);
            } else {
              dcols.resize(static_cast<std::size_t>(rows * ov));
              simd::gemm<T>(simd::Trans::kYes, simd::Trans::kNo, rows, ov, out_c, T(1), wv,
                            rows, go, ov, T(0), dcols.data(), ov);
              col2im(g, dcols.data(), dxn);
            }
          }
        }
      });
}

template Tensor<float> conv3d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                              Dims3, Dims3);
template Tensor<double> conv3d(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&, Dims3, Dims3);

}  // namespace stt::nn
