// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stt/core/tensor.hpp"

namespace stt::nn {

using Dims3 = std::array<std::int64_t, 3>;
using Rng = std::mt19937_64;

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// ---------------------------------------------------------------------------
// Ops

/// x: [N, C, T, H, W], weight: [O, C, kT, kH, kW], bias: [O] or undefined.
/// Output extent per axis is floor((in + 2p - k) / s) + 1.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Dims3 stride, Dims3 padding);

/// x: [C, T, H, W], coords: [M, 3] as (t, h, w) voxel positions.
/// Returns [C, M]; corners outside the volume contribute zero.
template <typename T>
Tensor<T> trilinear_sample(const Tensor<T>& x, const Tensor<T>& coords);

/// Linear upsampling of one axis by an integer factor (half-pixel centers,
/// edge-clamped).
template <typename T>
Tensor<T> upsample_axis(const Tensor<T>& x, int axis, std::int64_t factor);

/// Trilinear upsampling of [N, C, T, H, W] by per-axis integer factors.
template <typename T>
Tensor<T> upsample_trilinear(const Tensor<T>& x, Dims3 factors);

// ---------------------------------------------------------------------------
// Layers

template <typename T>
class Conv3dLayer {
 public:
  Conv3dLayer() = default;
  /// He-uniform weights, zero bias.
  Conv3dLayer(std::int64_t in_channels, std::int64_t out_channels, Dims3 kernel,
              Dims3 stride, Dims3 padding, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  std::int64_t in_channels() const { return weight_.dim(1); }
  std::int64_t out_channels() const { return weight_.dim(0); }
  Dims3 kernel() const { return {weight_.dim(2), weight_.dim(3), weight_.dim(4)}; }
  Dims3 stride() const { return stride_; }
  Dims3 padding() const { return padding_; }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

  /// Parameter count of a layer with these extents; zero when either
  /// channel count is zero (the layer is absent).
  static std::int64_t parameter_count(std::int64_t in_channels, std::int64_t out_channels,
                                      Dims3 kernel);

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
  Dims3 stride_{1, 1, 1};
  Dims3 padding_{0, 0, 0};
};

enum class Activation { kRelu };

/// Residual anisotropic convolution block: (1x3x3), (3x3x3), (3x3x3) convs
/// with a skip from the first conv's output to the third's.
///   out = act(conv3(act(conv2(act(conv1(x))))) + skip(conv1(x)))
/// skip is the identity unless the mid width differs from the output width.
template <typename T>
class AcbBlock {
 public:
  AcbBlock() = default;
  AcbBlock(std::int64_t in_channels, std::int64_t out_channels, Rng& rng,
           std::int64_t mid_channels = 0);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  Conv3dLayer<T>& conv1() { return conv1_; }
  Conv3dLayer<T>& conv2() { return conv2_; }
  Conv3dLayer<T>& conv3() { return conv3_; }
  const std::optional<Conv3dLayer<T>>& skip() const { return skip_; }
  Activation activation() const { return activation_; }

 private:
  Conv3dLayer<T> conv1_, conv2_, conv3_;
  std::optional<Conv3dLayer<T>> skip_;
  Activation activation_ = Activation::kRelu;
};

/// Layer normalization over the last axis with learned scale/shift.
template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::int64_t channels, T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }

 private:
  Tensor<T> gamma_;
  Tensor<T> beta_;
  T eps_ = T(1e-5);
};

/// Layer norm along an arbitrary axis (moved last, normalized, moved back).
template <typename T>
Tensor<T> layer_norm_axis(const Tensor<T>& x, int axis, const Tensor<T>& gamma,
                          const Tensor<T>& beta, T eps = T(1e-5));

/// Glorot-uniform [rows, cols] parameter.
template <typename T>
Tensor<T> glorot(std::int64_t rows, std::int64_t cols, Rng& rng, T gain = T(1));

}  // namespace stt::nn
