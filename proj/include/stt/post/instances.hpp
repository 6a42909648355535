// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stt/core/label_volume.hpp"

namespace stt::post {

struct PostConfig {
  double semantic_threshold = 0.8;
  double boundary_threshold = 0.5;
  int connectivity = 26;  // 6 | 26
  std::int64_t min_size = 64;

  /// Throws ValidationError.
  void validate() const;
};

/// seed = (sem > theta_s) AND (bnd < theta_b)
template <typename T>
std::vector<std::uint8_t> seed_mask(std::span<const T> sem, std::span<const T> bnd,
                                    const PostConfig& cfg);

/// Two-pass union-find labeling; components are numbered 1..k in raster
/// order of their first voxel.
LabelVolume connected_components_3d(std::span<const std::uint8_t> mask, Extents3 dims,
                                    int connectivity);

/// Assigns every unlabeled voxel with sem > theta_s the label of the nearest
/// seed (multi-source BFS in steps under the configured connectivity; the
/// smaller label wins at equal distance), drops components below min_size
/// and renumbers the rest 1..k keeping their order.
template <typename T>
LabelVolume grow_instances(const LabelVolume& seeds, std::span<const T> sem,
                           const PostConfig& cfg);

/// Removes components smaller than `min_size` voxels and renumbers the rest
/// 1..k in increasing old-label order.
LabelVolume remove_small_and_compact(const LabelVolume& labels, std::int64_t min_size);

/// seed_mask -> connected_components_3d -> grow_instances.
template <typename T>
LabelVolume extract_instances(std::span<const T> sem, std::span<const T> bnd, Extents3 dims,
                              const PostConfig& cfg);

/// Neighbour offsets (dt, dh, dw) of the given connectivity.
std::vector<std::array<int, 3>> neighbour_offsets(int connectivity);

}  // namespace stt::post
