// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "stt/nn/layers.hpp"

// Split spatio-temporal self-attention. Feature maps are [T, H, W, C]:
// spatial attention treats the H*W positions of one slice as tokens,
// temporal attention treats the T slices at one (h, w) as tokens.

namespace stt::sst {

using nn::Dims3;
using nn::ParamList;
using nn::Rng;

enum class Fusion { kDefConv, kConcat, kAddition };
enum class Topology { kSplit, kSpatialThenTemporal, kTemporalThenSpatial };

std::string to_string(Fusion f);
std::string to_string(Topology t);
/// Accepts "def-conv" | "concat" | "addition".
Fusion parse_fusion(const std::string& s);
/// Accepts "split" | "spatial-then-temporal" | "temporal-then-spatial".
Topology parse_topology(const std::string& s);

struct SstConfig {
  std::int64_t d_model = 0;
  std::int64_t d_k = 0;  // 0 means d_model
  Fusion fusion = Fusion::kDefConv;
  Topology topology = Topology::kSplit;
  Dims3 deform_kernel{1, 3, 3};
  std::int64_t max_spatial_tokens = 4096;

  std::int64_t dk() const { return d_k > 0 ? d_k : d_model; }
  std::int64_t taps() const { return deform_kernel[0] * deform_kernel[1] * deform_kernel[2]; }
  /// Throws ValidationError.
  void validate() const;
};

template <typename T>
struct SstWeights {
  nn::LayerNorm<T> norm;
  // [C, dk]. In cascaded topologies the second attention reads the first
  // one's output, so its projections are [dk, dk].
  Tensor<T> wq_s, wk_s, wv_s;
  Tensor<T> wq_t, wk_t, wv_t;
  // def-conv fusion: offsets from X_t (1x1x1, 3 per tap), kernel [dk, dk, kT, kH, kW]
  nn::Conv3dLayer<T> offset;
  Tensor<T> deform_weight;
  // concat fusion: [2dk, dk] + [dk]
  Tensor<T> concat_weight, concat_bias;
  // [dk, C] + [C]
  Tensor<T> out_weight, out_bias;

  /// Glorot projections, zero offset predictor.
  static SstWeights init(const SstConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, const SstConfig& cfg, ParamList<T>& out) const;
  static std::int64_t parameter_count(const SstConfig& cfg);
};

template <typename T>
struct AttentionMaps {
  Tensor<T> spatial;   // X_s [T, H, W, dk]
  Tensor<T> temporal;  // X_t [T, H, W, dk]
};

/// softmax(Q K^T / sqrt(dk)) for every slice: [T, H*W, H*W].
template <typename T>
Tensor<T> spatial_attention_weights(const Tensor<T>& x, const Tensor<T>& wq,
                                    const Tensor<T>& wk);
/// Same per (h, w): [H*W, T, T].
template <typename T>
Tensor<T> temporal_attention_weights(const Tensor<T>& x, const Tensor<T>& wq,
                                     const Tensor<T>& wk);

template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk,
                            const Tensor<T>& wv,
                            std::int64_t max_tokens = 4096);
template <typename T>
Tensor<T> temporal_attention(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk,
                             const Tensor<T>& wv);

/// out(k0) = sum_n W(k_n) . X_s(k0 + k_n + dK_n(k0)), with offsets predicted
/// from X_t. Kernel extents must be odd; the temporal offset is dropped when
/// kT == 1. Returns [T, H, W, C_out].
template <typename T>
Tensor<T> deformable_fuse(const AttentionMaps<T>& maps, const nn::Conv3dLayer<T>& offset,
                          const Tensor<T>& weight);

template <typename T>
AttentionMaps<T> attention_maps(const Tensor<T>& normalized, const SstWeights<T>& w,
                                const SstConfig& cfg);

/// x + proj(fuse(attention(layer_norm(x)))), x: [T, H, W, C].
template <typename T>
Tensor<T> sst_forward(const Tensor<T>& x, const SstWeights<T>& w, const SstConfig& cfg);

/// Reshapes between the convolution layout [1, C, T, H, W] and [T, H, W, C].
template <typename T>
Tensor<T> to_tokens(const Tensor<T>& x);
template <typename T>
Tensor<T> from_tokens(const Tensor<T>& x);

}  // namespace stt::sst
