// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "stt/data/volume_io.hpp"
#include "stt/model/model.hpp"
#include "stt/post/instances.hpp"

namespace stt::app {

/// Window origins along one axis: 0, s, 2s, ... with s = max(1, patch / 2),
/// plus extent - patch so the last window ends at the border.
std::vector<std::int64_t> tile_starts(std::int64_t extent, std::int64_t patch);

/// Raised cosine 0.5 (1 - cos(2 pi (i + 1) / (n + 1))), strictly positive.
std::vector<double> cosine_window(std::int64_t n);

template <typename T>
struct Prediction {
  Extents3 dims{0, 0, 0};
  std::vector<T> semantic;  // probabilities
  std::vector<T> boundary;
  std::int64_t tiles = 0;
};

/// Writes the semantic and boundary probabilities of one patch (raster order).
template <typename T>
using TileFn = std::function<void(const std::vector<T>& patch_image, std::vector<T>& semantic,
                                  std::vector<T>& boundary)>;

/// Runs `fn` on every window and blends overlapping outputs with the
/// separable cosine window. Axes where the volume equals the patch get a
/// single window of weight 1; a volume equal to the patch is one call with
/// no blending. Throws ShapeError when the volume is smaller than the patch.
template <typename T>
Prediction<T> sliding_window(const data::ImageVolume& img, Extents3 patch, const TileFn<T>& fn);

template <typename T>
Prediction<T> predict_volume(const model::SttUnet<T>& m, const data::ImageVolume& img);

struct InferResult {
  LabelVolume labels;
  std::vector<double> scores;  // mean semantic probability per instance
  std::int64_t tiles = 0;
};

template <typename T>
InferResult infer_volume(const model::SttUnet<T>& m, const data::ImageVolume& img,
                         const post::PostConfig& cfg);

/// Loads a trainer checkpoint at its stored precision and runs infer_volume
/// with the stored post-processing config.
InferResult infer_with_checkpoint(const std::filesystem::path& ckpt, const data::ImageVolume& img);

/// `<stem>.json/.raw` label volume plus `<stem>.scores.json`.
void write_inference(const std::filesystem::path& out, const InferResult& r,
                     const data::VoxelSize& voxel_size);
/// Scores written next to a label volume, or an empty vector if absent.
std::vector<double> read_scores(const std::filesystem::path& labels_path);

}  // namespace stt::app
