// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stt/core/label_volume.hpp"
#include "stt/model/model.hpp"
#include "stt/nn/layers.hpp"

namespace stt::loss {

struct LossWeights {
  double lambda = 0.5;   // weight of the adversarial term in the total loss
  double lambda1 = 0.1;  // weight of the discriminator matching term

  /// Throws ValidationError on negative weights.
  void validate() const;
};

/// Two stride-2 3x3x3 convs (in -> hidden -> 1) with a LeakyReLU between
/// them, averaged over the remaining volume into one logit per sample.
template <typename T>
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::int64_t in_channels, std::int64_t hidden, nn::Rng& rng);

  /// f [N, in, T, H, W] -> logits [N]. With `frozen`, the weights enter the
  /// graph as constants.
  Tensor<T> logits(const Tensor<T>& f, bool frozen = false) const;
  /// sigmoid(logits)
  Tensor<T> probability(const Tensor<T>& f) const;

  void collect(const std::string& prefix, nn::ParamList<T>& out) const;
  nn::ParamList<T> parameters() const;

  nn::Conv3dLayer<T>& conv1() { return conv1_; }
  nn::Conv3dLayer<T>& conv2() { return conv2_; }
  std::int64_t in_channels() const { return conv1_.in_channels(); }

  static constexpr double kSlope = 0.2;

 private:
  nn::Conv3dLayer<T> conv1_, conv2_;
};

/// Mean binary cross-entropy from logits (stable log-sum-exp form).
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& target);

template <typename T>
struct AdversarialLoss {
  Tensor<T> gen;       // -log D(F_pr) + lambda1 * matching; reaches only m_pred
  Tensor<T> disc;      // -log D(F_gt) - log(1 - D(F_pr)); reaches only D
  Tensor<T> matching;  // |D(F_gt) - D(F_pr)|, batch mean
};

/// image, m_pred, m_gt: [N, 1, T, H, W]; masks must lie in [0, 1].
/// F = concat(image, mask) along channels.
template <typename T>
AdversarialLoss<T> fg_bg_adversarial_loss(const Tensor<T>& image, const Tensor<T>& m_pred,
                                          const Tensor<T>& m_gt, const Discriminator<T>& d,
                                          double lambda1);

template <typename T>
struct SegTargets {
  Tensor<T> semantic;  // [N, 1, T, H, W] in {0, 1}
  Tensor<T> boundary;
};

/// bce(semantic) + bce(boundary) + lambda * gen_loss; an undefined gen_loss
/// counts as zero.
template <typename T>
Tensor<T> total_loss(const model::ModelOutput<T>& out, const SegTargets<T>& targets,
                     const Tensor<T>& gen_loss, const LossWeights& weights);

/// Foreground voxels (label != 0).
std::vector<std::uint8_t> semantic_mask(const LabelVolume& labels);
/// Labeled voxels with an in-plane 4-neighbour carrying a different label
/// (background included): the instance minus its 1-voxel in-plane erosion.
/// Neighbours outside the volume do not count.
std::vector<std::uint8_t> boundary_mask(const LabelVolume& labels);
/// Voxels within `radius` (Chebyshev, in-plane) of a label change.
std::vector<std::uint8_t> boundary_region(const LabelVolume& labels, std::int64_t radius);

/// Stacks per-sample masks into [N, 1, T, H, W].
template <typename T>
Tensor<T> mask_tensor(const std::vector<std::vector<std::uint8_t>>& masks, Extents3 dims);

/// Mean BCE over voxels where `region` is set (0 if the region is empty).
double masked_bce(std::span<const double> logits, std::span<const std::uint8_t> target,
                  std::span<const std::uint8_t> region);

}  // namespace stt::loss
