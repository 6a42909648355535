// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "stt/core/label_volume.hpp"
#include "stt/data/volume_io.hpp"

namespace stt::data {

using Rng = std::mt19937_64;

/// A (T, H, W) sub-volume with its labels; single channel.
struct VolumePatch {
  Extents3 dims{0, 0, 0};
  Extents3 corner{0, 0, 0};
  VoxelSize voxel_size_nm{30.0, 8.0, 8.0};
  std::vector<float> image;
  LabelVolume labels;
};

/// Copies the block starting at `corner`.
VolumePatch crop(const ImageVolume& img, const LabelVolume& labels, Extents3 corner,
                 Extents3 dims);

/// Uniform corner; with probability `rebalance` the draw is repeated (up to
/// `max_tries` draws in total) until the patch holds foreground.
VolumePatch sample_patch(const ImageVolume& img, const LabelVolume& labels, Extents3 dims,
                         Rng& rng, double rebalance = 0.9, int max_tries = 10);

struct AugmentConfig {
  double flip_h = 0.5;
  double flip_w = 0.5;
  double rot90 = 0.5;  // in-plane, only when H == W
  double flip_t = 0.5;
  double intensity = 0.5;       // brightness / contrast jitter
  double intensity_range = 0.1;  // +-10 %
  double noise = 0.5;
  double noise_sigma_max = 0.02;

  static AugmentConfig none();
  static AugmentConfig geometric_only();
};

/// Each op applied independently with its probability; geometric ops act on
/// image and labels alike, intensity ops on the image only (clamped to [0, 1]).
void augment(VolumePatch& p, Rng& rng, const AugmentConfig& cfg);

// Individual geometric ops (self-inverse except rot90, which rot90 x3 undoes).
void flip_axis(VolumePatch& p, int axis);
void rotate90(VolumePatch& p);

}  // namespace stt::data
