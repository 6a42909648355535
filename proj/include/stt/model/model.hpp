// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "stt/nn/layers.hpp"
#include "stt/sst/sst.hpp"

namespace stt::model {

using nn::Dims3;
using nn::ParamList;
using nn::Rng;

enum class DenoiserMode { kKernelPredict, kIdentity };

std::string to_string(DenoiserMode m);
/// "kernel-predict" | "identity"
DenoiserMode parse_denoiser(const std::string& s);

inline constexpr int kEncoderLevels = 4;
inline constexpr int kDecoderLevels = 3;

struct ModelConfig {
  std::array<std::int64_t, kEncoderLevels> widths{16, 32, 64, 96};
  // SST after the ACB of each encoder level / decoder level (decoder levels
  // indexed by the resolution they produce, 0 = full resolution).
  std::array<bool, kEncoderLevels> sst_encoder{false, true, true, true};
  std::array<bool, kDecoderLevels> sst_decoder{false, true, true};
  // Fusion, topology, deform kernel and token limit; d_model is set per
  // level, d_k = 0 follows the level width.
  sst::SstConfig sst;
  DenoiserMode denoiser = DenoiserMode::kKernelPredict;
  std::int64_t denoiser_width = 8;
  Dims3 patch{8, 64, 64};
  // Initial output probabilities; the head biases start at their logits.
  double semantic_prior = 0.1;
  double boundary_prior = 0.05;

  /// Throws ValidationError.
  void validate() const;
  /// Extent reduction from level l to l+1.
  static Dims3 down_factor(int level);
  /// (T, H, W) of every encoder level for an input of `patch` extents.
  std::array<Dims3, kEncoderLevels> level_shapes(Dims3 input) const;
  sst::SstConfig sst_at(std::int64_t width) const;
};

/// Per-frame kernel prediction from (previous, current, next) frames.
template <typename T>
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(std::int64_t width, Rng& rng);

  /// x [N, 1, T, H, W] -> softmax-normalized kernels [N, T, 27], ordered
  /// (frame prev/cur/next, dy, dx).
  Tensor<T> predict_kernels(const Tensor<T>& x) const;
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
  static std::int64_t parameter_count(std::int64_t width);

  nn::Conv3dLayer<T>& conv() { return conv_; }
  Tensor<T>& linear_weight() { return lin_w_; }
  Tensor<T>& linear_bias() { return lin_b_; }

 private:
  nn::Conv3dLayer<T> conv_;
  Tensor<T> lin_w_;  // [width, 27]
  Tensor<T> lin_b_;  // [27]
};

/// out[t] = k_prev * x[t-1] + k_cur * x[t] + k_next * x[t+1] with 3x3
/// kernels shared over the frame. Replicate padding in all three axes.
/// x [N, 1, T, H, W], kernels [N, T, 27].
template <typename T>
Tensor<T> frame_kernel_apply(const Tensor<T>& x, const Tensor<T>& kernels);

/// Frames t-1, t, t+1 stacked as channels (replicated at the ends):
/// [N, 1, T, H, W] -> [N, 3, T, H, W].
template <typename T>
Tensor<T> adjacent_frames(const Tensor<T>& x);

template <typename T>
struct ModelOutput {
  Tensor<T> semantic_logits;  // [N, 1, T, H, W]
  Tensor<T> boundary_logits;  // [N, 1, T, H, W]
};

template <typename T>
class SttUnet {
 public:
  SttUnet() = default;
  SttUnet(const ModelConfig& cfg, Rng& rng);

  /// x [N, 1, T, H, W] with T divisible by 2 and H, W by 8.
  ModelOutput<T> forward(const Tensor<T>& x) const;
  /// Denoiser stage alone; returns x itself in identity mode.
  Tensor<T> denoise(const Tensor<T>& x) const;
  /// Encoder features per level, for inspection.
  std::vector<Tensor<T>> encode(const Tensor<T>& x) const;

  ParamList<T> parameters() const;
  const ModelConfig& config() const { return cfg_; }

  Denoiser<T>& denoiser() { return denoiser_; }
  nn::Conv3dLayer<T>& semantic_head() { return sem_head_; }
  nn::Conv3dLayer<T>& boundary_head() { return bnd_head_; }

 private:
  Tensor<T> apply_sst(const Tensor<T>& x, const sst::SstWeights<T>& w,
                      const sst::SstConfig& cfg) const;

  ModelConfig cfg_;
  Denoiser<T> denoiser_;
  std::array<nn::AcbBlock<T>, kEncoderLevels> enc_acb_;
  std::array<sst::SstWeights<T>, kEncoderLevels> enc_sst_;
  std::array<nn::Conv3dLayer<T>, kEncoderLevels - 1> down_;
  std::array<nn::Conv3dLayer<T>, kDecoderLevels> up_;
  std::array<nn::AcbBlock<T>, kDecoderLevels> dec_acb_;
  std::array<sst::SstWeights<T>, kDecoderLevels> dec_sst_;
  nn::Conv3dLayer<T> sem_head_, bnd_head_;
};

/// Analytic (layer prefix, scalar count) list in parameter order; layers with
/// a zero input or output width count zero.
std::vector<std::pair<std::string, std::int64_t>> parameter_breakdown(const ModelConfig& cfg);
std::int64_t count_parameters(const ModelConfig& cfg);

}  // namespace stt::model
