// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "stt/core/autograd.hpp"
#include "stt/nn/layers.hpp"

namespace stt::nn {
namespace {

// Eight corner indices (-1 when out of bounds) and weights of one sample.
template <typename T>
struct Corners {
  std::int64_t index[8];
  T weight[8];
  // d weight / d(t, h, w)
  T dweight[8][3];
};

template <typename T>
Corners<T> corners(T t, T h, T w, std::int64_t nt, std::int64_t nh, std::int64_t nw) {
  Corners<T> c;
  const T t0f = std::floor(t), h0f = std::floor(h), w0f = std::floor(w);
  const T ft = t - t0f, fh = h - h0f, fw = w - w0f;
  const auto t0 = static_cast<std::int64_t>(t0f);
  const auto h0 = static_cast<std::int64_t>(h0f);
  const auto w0 = static_cast<std::int64_t>(w0f);
  int j = 0;
  for (int a = 0; a < 2; ++a) {
    const T wt = a ? ft : T(1) - ft;
    const T dwt = a ? T(1) : T(-1);
    const std::int64_t ti = t0 + a;
    for (int b = 0; b < 2; ++b) {
      const T wh = b ? fh : T(1) - fh;
      const T dwh = b ? T(1) : T(-1);
      const std::int64_t hi = h0 + b;
      for (int d = 0; d < 2; ++d, ++j) {
        const T ww = d ? fw : T(1) - fw;
        const T dww = d ? T(1) : T(-1);
        const std::int64_t wi = w0 + d;
        const bool inside = ti >= 0 && ti < nt && hi >= 0 && hi < nh && wi >= 0 && wi < nw;
        c.index[j] = inside ? (ti * nh + hi) * nw + wi : -1;
        c.weight[j] = wt * wh * ww;
        c.dweight[j][0] = dwt * wh * ww;
        c.dweight[j][1] = wt * dwh * ww;
        c.dweight[j][2] = wt * wh * dww;
      }
    }
  }
  return c;
}

}  // namespace

template <typename T>
Tensor<T> trilinear_sample(const Tensor<T>& x, const Tensor<T>& coords) {
  if (x.rank() != 4 || coords.rank() != 2 || coords.dim(1) != 3) {
    throw ShapeError("trilinear_sample expects x [C,T,H,W] and coords [M,3], got " +
                     shape_str(x.shape()) + " and " + shape_str(coords.shape()));
  }
  const std::int64_t channels = x.dim(0), nt = x.dim(1), nh = x.dim(2), nw = x.dim(3);
  const std::int64_t vol = nt * nh * nw;
  const std::int64_t m = coords.dim(0);
  const T* cd = coords.data().data();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(m * 8));
  std::vector<T> wts(static_cast<std::size_t>(m * 8));
  for (std::int64_t i = 0; i < m; ++i) {
    const auto c = corners<T>(cd[3 * i], cd[3 * i + 1], cd[3 * i + 2], nt, nh, nw);
    for (int j = 0; j < 8; ++j) {
      idx[i * 8 + j] = c.index[j];
      wts[i * 8 + j] = c.weight[j];
    }
  }
  std::vector<T> out(static_cast<std::size_t>(channels * m));
  const T* xd = x.data().data();
  for (std::int64_t ch = 0; ch < channels; ++ch) {
    const T* xc = xd + ch * vol;
    T* oc = out.data() + ch * m;
    for (std::int64_t i = 0; i < m; ++i) {
      T acc = 0;
      for (int j = 0; j < 8; ++j) {
        const auto k = idx[i * 8 + j];
        if (k >= 0) acc += wts[i * 8 + j] * xc[k];
      }
      oc[i] = acc;
    }
  }
  return autograd::make_result<T>(
      Shape{channels, m}, std::move(out), {x, coords}, "trilinear_sample",
      [idx = std::move(idx), wts = std::move(wts), channels, vol, m, nt, nh,
       nw](TensorNode<T>& o) {
        auto gx = autograd::parent_grad(o, 0);
        auto gc = autograd::parent_grad(o, 1);
        const T* go = o.grad.data();
        if (!gx.empty()) {
          for (std::int64_t ch = 0; ch < channels; ++ch) {
            T* gxc = gx.data() + ch * vol;
            const T* g = go + ch * m;
            for (std::int64_t i = 0; i < m; ++i) {
              for (int j = 0; j < 8; ++j) {
                const auto k = idx[i * 8 + j];
                if (k >= 0) gxc[k] += wts[i * 8 + j] * g[i];
              }
            }
          }
        }
        if (gc.empty()) return;
        const T* xd = autograd::parent(o, 0).data.data();
        const T* cd = autograd::parent(o, 1).data.data();
        for (std::int64_t i = 0; i < m; ++i) {
          const auto c = corners<T>(cd[3 * i], cd[3 * i + 1], cd[3 * i + 2], nt, nh, nw);
          T acc[3] = {0, 0, 0};
          for (int j = 0; j < 8; ++j) {
            if (c.index[j] < 0) continue;
            T s = 0;
            for (std::int64_t ch = 0; ch < channels; ++ch) {
              s += go[ch * m + i] * xd[ch * vol + c.index[j]];
            }
            for (int a = 0; a < 3; ++a) acc[a] += c.dweight[j][a] * s;
          }
          for (int a = 0; a < 3; ++a) gc[3 * i + a] += acc[a];
        }
      });
}

template <typename T>
Tensor<T> upsample_axis(const Tensor<T>& x, int axis, std::int64_t factor) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r || factor < 1) {
    throw ShapeError("upsample_axis: bad axis/factor for shape " + shape_str(x.shape()));
  }
  if (factor == 1) return x;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis + 1; i < r; ++i) inner *= x.shape()[i];
  const std::int64_t n_in = x.shape()[axis];
  const std::int64_t n_out = n_in * factor;
  std::vector<std::int64_t> lo(n_out), hi(n_out);
  std::vector<T> frac(n_out);
  for (std::int64_t o = 0; o < n_out; ++o) {
    T src = (static_cast<T>(o) + T(0.5)) / static_cast<T>(factor) - T(0.5);
    src = std::clamp(src, T(0), static_cast<T>(n_in - 1));
    const auto i0 = static_cast<std::int64_t>(std::floor(src));
    lo[o] = i0;
    hi[o] = std::min(i0 + 1, n_in - 1);
    frac[o] = src - static_cast<T>(i0);
  }
  Shape out_shape = x.shape();
  out_shape[axis] = n_out;
  std::vector<T> out(static_cast<std::size_t>(outer * n_out * inner));
  const T* xd = x.data().data();
  for (std::int64_t b = 0; b < outer; ++b) {
    for (std::int64_t o = 0; o < n_out; ++o) {
      const T* r0 = xd + (b * n_in + lo[o]) * inner;
      const T* r1 = xd + (b * n_in + hi[o]) * inner;
      T* dst = out.data() + (b * n_out + o) * inner;
      const T f = frac[o];
      for (std::int64_t i = 0; i < inner; ++i) dst[i] = (T(1) - f) * r0[i] + f * r1[i];
    }
  }
  return autograd::make_result<T>(
      std::move(out_shape), std::move(out), {x}, "upsample_axis",
      [lo = std::move(lo), hi = std::move(hi), frac = std::move(frac), outer, inner, n_in,
       n_out](TensorNode<T>& o) {
        auto gx = autograd::parent_grad(o, 0);
        if (gx.empty()) return;
        for (std::int64_t b = 0; b < outer; ++b) {
          for (std::int64_t k = 0; k < n_out; ++k) {
            const T* g = o.grad.data() + (b * n_out + k) * inner;
            T* d0 = gx.data() + (b * n_in + lo[k]) * inner;
            T* d1 = gx.data() + (b * n_in + hi[k]) * inner;
            const T f = frac[k];
            for (std::int64_t i = 0; i < inner; ++i) {
              d0[i] += (T(1) - f) * g[i];
              d1[i] += f * g[i];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> upsample_trilinear(const Tensor<T>& x, Dims3 factors) {
  if (x.rank() != 5) {
    throw ShapeError("upsample_trilinear expects [N,C,T,H,W], got " + shape_str(x.shape()));
  }
  Tensor<T> y = x;
  for (int a = 0; a < 3; ++a) y = upsample_axis(y, 2 + a, factors[a]);
  return y;
}

#define STT_INSTANTIATE(T)                                                  \
  template Tensor<T> trilinear_sample(const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> upsample_axis(const Tensor<T>&, int, std::int64_t);    \
  template Tensor<T> upsample_trilinear(const Tensor<T>&, Dims3);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

#undef STT_INSTANTIATE

}  // namespace stt::nn
