// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "stt/core/autograd.hpp"
#include "stt/core/ops.hpp"
#include "stt/model/model.hpp"

namespace stt::model {

namespace {

constexpr std::int64_t kTaps = 27;
constexpr std::int64_t kCenterTap = 9 + 4;  // current frame, (0, 0)
constexpr double kCenterBias = 6.0;

struct Geometry {
  std::int64_t n, t, h, w;
};

template <typename T>
Geometry check_apply(const Tensor<T>& x, const Tensor<T>& k) {
  if (x.rank() != 5 || x.dim(1) != 1 || k.rank() != 3 || k.dim(0) != x.dim(0) ||
      k.dim(1) != x.dim(2) || k.dim(2) != kTaps) {
    throw ShapeError("frame_kernel_apply expects x [N,1,T,H,W] and kernels [N,T,27], got " +
                     shape_str(x.shape()) + " and " + shape_str(k.shape()));
  }
  return {x.dim(0), x.dim(2), x.dim(3), x.dim(4)};
}

inline std::int64_t clamp_index(std::int64_t i, std::int64_t n) {
  return std::clamp<std::int64_t>(i, 0, n - 1);
}

}  // namespace

std::string to_string(DenoiserMode m) {
  return m == DenoiserMode::kIdentity ? "identity" : "kernel-predict";
}

DenoiserMode parse_denoiser(const std::string& s) {
  if (s == "identity") return DenoiserMode::kIdentity;
  if (s == "kernel-predict") return DenoiserMode::kKernelPredict;
  throw ValidationError("denoiser must be kernel-predict|identity, got '" + s + "'");
}

template <typename T>
Tensor<T> frame_kernel_apply(const Tensor<T>& x, const Tensor<T>& kernels) {
  const Geometry g = check_apply(x, kernels);
  const T* xd = x.data().data();
  const T* kd = kernels.data().data();
  std::vector<T> out(static_cast<std::size_t>(x.numel()), T(0));
  const std::int64_t plane = g.h * g.w;
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t t = 0; t < g.t; ++t) {
      const T* k = kd + (n * g.t + t) * kTaps;
      T* o = out.data() + (n * g.t + t) * plane;
      for (int f = 0; f < 3; ++f) {
        const T* src = xd + (n * g.t + clamp_index(t + f - 1, g.t)) * plane;
        for (int dy = 0; dy < 3; ++dy) {
          for (int dx = 0; dx < 3; ++dx) {
            const T kv = k[f * 9 + dy * 3 + dx];
            for (std::int64_t h = 0; h < g.h; ++h) {
              const T* row = src + clamp_index(h + dy - 1, g.h) * g.w;
              T* orow = o + h * g.w;
              for (std::int64_t w = 0; w < g.w; ++w) {
                orow[w] += kv * row[clamp_index(w + dx - 1, g.w)];
              }
            }
          }
        }
      }
    }
  }
  return autograd::make_result<T>(
      x.shape(), std::move(out), {x, kernels}, "frame_kernel_apply",
      [g, plane](TensorNode<T>& o) {
        auto gx = autograd::parent_grad(o, 0);
        auto gk = autograd::parent_grad(o, 1);
        const T* xd = autograd::parent(o, 0).data.data();
        const T* kd = autograd::parent(o, 1).data.data();
        for (std::int64_t n = 0; n < g.n; ++n) {
          for (std::int64_t t = 0; t < g.t; ++t) {
            const T* go = o.grad.data() + (n * g.t + t) * plane;
            const T* k = kd + (n * g.t + t) * kTaps;
            for (int f = 0; f < 3; ++f) {
              const std::int64_t src_off = (n * g.t + clamp_index(t + f - 1, g.t)) * plane;
              for (int dy = 0; dy < 3; ++dy) {
                for (int dx = 0; dx < 3; ++dx) {
                  const int tap = f * 9 + dy * 3 + dx;
                  T acc = 0;
                  for (std::int64_t h = 0; h < g.h; ++h) {
                    const std::int64_t r = src_off + clamp_index(h + dy - 1, g.h) * g.w;
                    const T* grow = go + h * g.w;
                    for (std::int64_t w = 0; w < g.w; ++w) {
                      const std::int64_t idx = r + clamp_index(w + dx - 1, g.w);
                      acc += grow[w] * xd[idx];
                      if (!gx.empty()) gx[idx] += k[tap] * grow[w];
                    }
                  }
                  if (!gk.empty()) gk[(n * g.t + t) * kTaps + tap] += acc;
                }
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> adjacent_frames(const Tensor<T>& x) {
  if (x.rank() != 5 || x.dim(1) != 1) {
    throw ShapeError("adjacent_frames expects [N,1,T,H,W], got " + shape_str(x.shape()));
  }
  const std::int64_t nt = x.dim(2);
  if (nt == 1) return concat<T>({x, x, x}, 1);
  const Tensor<T> prev = concat<T>({slice(x, 2, 0, 1), slice(x, 2, 0, nt - 1)}, 2);
  const Tensor<T> next = concat<T>({slice(x, 2, 1, nt - 1), slice(x, 2, nt - 1, 1)}, 2);
  return concat<T>({prev, x, next}, 1);
}

template <typename T>
Denoiser<T>::Denoiser(std::int64_t width, Rng& rng)
    : conv_(3, width, {1, 3, 3}, {1, 1, 1}, {0, 1, 1}, rng),
      lin_w_(Tensor<T>::zeros({width, kTaps}, true)),
      lin_b_(Tensor<T>::zeros({kTaps}, true)) {
  lin_b_.mutable_data()[kCenterTap] = static_cast<T>(kCenterBias);
}

template <typename T>
Tensor<T> Denoiser<T>::predict_kernels(const Tensor<T>& x) const {
  const std::int64_t n = x.dim(0), nt = x.dim(2);
  const std::int64_t width = conv_.out_channels();
  Tensor<T> h = relu(conv_.forward(adjacent_frames(x)));
  h = mean_axis(reshape(h, {n, width, nt, x.dim(3) * x.dim(4)}), 3);  // [N, width, T]
  const Tensor<T> logits = add_bias(matmul(permute(h, {0, 2, 1}), lin_w_), lin_b_);
  return softmax(logits, 2);
}

template <typename T>
Tensor<T> Denoiser<T>::forward(const Tensor<T>& x) const {
  return frame_kernel_apply(x, predict_kernels(x));
}

template <typename T>
void Denoiser<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  conv_.collect(prefix + ".conv", out);
  out.push_back({prefix + ".linear.weight", lin_w_});
  out.push_back({prefix + ".linear.bias", lin_b_});
}

template <typename T>
std::int64_t Denoiser<T>::parameter_count(std::int64_t width) {
  if (width <= 0) return 0;
  return nn::Conv3dLayer<T>::parameter_count(3, width, {1, 3, 3}) + width * kTaps + kTaps;
}

template class Denoiser<float>;
template class Denoiser<double>;
template Tensor<float> frame_kernel_apply(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> frame_kernel_apply(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> adjacent_frames(const Tensor<float>&);
template Tensor<double> adjacent_frames(const Tensor<double>&);

}  // namespace stt::model
