// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "stt/core/label_volume.hpp"

namespace stt::metrics {

struct JaccardDsc {
  double jaccard = 1.0;
  double dsc = 1.0;
};

/// Both are 1 when the two masks are empty. Nonzero entries count as set.
JaccardDsc jaccard_dsc(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);

/// IoU of every (pred, gt) instance pair present in the volumes, from one
/// contingency sweep. Rows follow pred_ids, columns gt_ids (ascending).
struct IouMatrix {
  std::vector<std::uint32_t> pred_ids;
  std::vector<std::uint32_t> gt_ids;
  std::vector<double> values;  // row-major [pred, gt]

  std::int64_t rows() const { return static_cast<std::int64_t>(pred_ids.size()); }
  std::int64_t cols() const { return static_cast<std::int64_t>(gt_ids.size()); }
  double at(std::int64_t i, std::int64_t j) const {
    return values[static_cast<std::size_t>(i * cols() + j)];
  }
};

IouMatrix iou_matrix(const LabelVolume& pred, const LabelVolume& gt);

struct Match {
  std::uint32_t pred = 0;
  std::uint32_t gt = 0;
  double iou = 0.0;
};

struct ApResult {
  double ap = 0.0;
  std::vector<Match> matches;
};

/// Average precision at an IoU threshold. `scores` has one entry per pred
/// instance, in ascending pred id order. Predictions are visited by
/// descending score (ties by pred id) and each takes the unmatched gt of
/// highest IoU if that IoU reaches the threshold. The area under the
/// precision-recall curve uses all-points interpolation. Without gt
/// instances AP is 1 if there are no predictions, else 0.
ApResult average_precision(const LabelVolume& pred, std::span<const double> scores,
                           const LabelVolume& gt, double threshold = 0.75);
ApResult average_precision(const IouMatrix& iou, std::span<const double> scores,
                           double threshold = 0.75);
double ap75(const LabelVolume& pred, std::span<const double> scores, const LabelVolume& gt);

/// Mean of `sem` over each pred instance's voxels, ascending pred id.
template <typename T>
std::vector<double> instance_scores(const LabelVolume& pred, std::span<const T> sem);

struct MetricReport {
  double ap75 = 0.0;
  double jaccard = 0.0;
  double dsc = 0.0;
  IouMatrix iou;
  std::vector<Match> matches;

  nlohmann::json to_json() const;
};

/// Semantic overlap from the foreground of both label volumes plus AP-75.
MetricReport evaluate(const LabelVolume& pred, std::span<const double> scores,
                      const LabelVolume& gt);

}  // namespace stt::metrics
