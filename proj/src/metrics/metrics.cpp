// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/metrics/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "stt/core/error.hpp"

namespace stt::metrics {

JaccardDsc jaccard_dsc(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError("jaccard_dsc: " + std::to_string(pred.size()) + " vs " +
                     std::to_string(gt.size()) + " voxels");
  }
  std::int64_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    np += p;
    ng += g;
    inter += p && g;
  }
  if (np + ng == 0) return {};
  const double j = static_cast<double>(inter) / static_cast<double>(np + ng - inter);
  const double d = 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
  return {j, d};
}

namespace {

std::vector<std::uint32_t> present_ids(const LabelVolume& v) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(v.max_label()) + 1, 0);
  for (const auto l : v.labels) seen[l] = 1;
  std::vector<std::uint32_t> ids;
  for (std::uint32_t l = 1; l < seen.size(); ++l) {
    if (seen[l]) ids.push_back(l);
  }
  return ids;
}

}  // namespace

IouMatrix iou_matrix(const LabelVolume& pred, const LabelVolume& gt) {
  if (pred.dims != gt.dims) throw ShapeError("iou_matrix: label volumes differ in extents");
  IouMatrix m;
  m.pred_ids = present_ids(pred);
  m.gt_ids = present_ids(gt);
  std::vector<std::int64_t> prow(static_cast<std::size_t>(pred.max_label()) + 1, -1);
  std::vector<std::int64_t> gcol(static_cast<std::size_t>(gt.max_label()) + 1, -1);
  for (std::size_t i = 0; i < m.pred_ids.size(); ++i) prow[m.pred_ids[i]] = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j < m.gt_ids.size(); ++j) gcol[m.gt_ids[j]] = static_cast<std::int64_t>(j);

  const auto np = m.pred_ids.size(), ng = m.gt_ids.size();
  std::vector<std::int64_t> table(np * ng, 0), psize(np, 0), gsize(ng, 0);
  for (std::size_t v = 0; v < pred.labels.size(); ++v) {
    const std::int64_t i = prow[pred.labels[v]], j = gcol[gt.labels[v]];
    if (i >= 0) ++psize[static_cast<std::size_t>(i)];
    if (j >= 0) ++gsize[static_cast<std::size_t>(j)];
    if (i >= 0 && j >= 0) ++table[static_cast<std::size_t>(i) * ng + static_cast<std::size_t>(j)];
  }
  m.values.assign(np * ng, 0.0);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < ng; ++j) {
      const std::int64_t inter = table[i * ng + j];
      if (inter == 0) continue;
      m.values[i * ng + j] =
          static_cast<double>(inter) / static_cast<double>(psize[i] + gsize[j] - inter);
    }
  }
  return m;
}

ApResult average_precision(const IouMatrix& iou, std::span<const double> scores,
                           double threshold) {
  const std::int64_t np = iou.rows(), ng = iou.cols();
  if (static_cast<std::int64_t>(scores.size()) != np) {
    throw ValidationError("ap: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(np) + " predicted instances");
  }
  ApResult r;
  if (ng == 0) {
    r.ap = np == 0 ? 1.0 : 0.0;
    return r;
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(np));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t b) { return scores[a] > scores[b]; });

  std::vector<std::uint8_t> taken(static_cast<std::size_t>(ng), 0);
  std::vector<double> precision, recall;
  std::int64_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::int64_t i = order[k];
    std::int64_t best = -1;
    double best_iou = 0.0;
    for (std::int64_t j = 0; j < ng; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      const double v = iou.at(i, j);
      if (v >= threshold && v > best_iou) {
        best = j;
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = 1;
      ++tp;
      r.matches.push_back({iou.pred_ids[static_cast<std::size_t>(i)],
                           iou.gt_ids[static_cast<std::size_t>(best)], best_iou});
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(ng));
  }
  // all-points interpolation: running max of precision from the right
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    r.ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return r;
}

ApResult average_precision(const LabelVolume& pred, std::span<const double> scores,
                           const LabelVolume& gt, double threshold) {
  return average_precision(iou_matrix(pred, gt), scores, threshold);
}

double ap75(const LabelVolume& pred, std::span<const double> scores, const LabelVolume& gt) {
  return average_precision(pred, scores, gt, 0.75).ap;
}

template <typename T>
std::vector<double> instance_scores(const LabelVolume& pred, std::span<const T> sem) {
  if (static_cast<std::int64_t>(sem.size()) != pred.size()) {
    throw ShapeError("instance_scores: probability volume does not match the labels");
  }
  const auto ids = present_ids(pred);
  std::vector<std::int64_t> slot(static_cast<std::size_t>(pred.max_label()) + 1, -1);
  for (std::size_t i = 0; i < ids.size(); ++i) slot[ids[i]] = static_cast<std::int64_t>(i);
  std::vector<double> total(ids.size(), 0.0);
  std::vector<std::int64_t> count(ids.size(), 0);
  for (std::size_t v = 0; v < sem.size(); ++v) {
    const std::int64_t s = slot[pred.labels[v]];
    if (s < 0) continue;
    total[static_cast<std::size_t>(s)] += static_cast<double>(sem[v]);
    ++count[static_cast<std::size_t>(s)];
  }
  for (std::size_t i = 0; i < ids.size(); ++i) total[i] /= static_cast<double>(count[i]);
  return total;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["ap75"] = ap75;
  j["jaccard"] = jaccard;
  j["dsc"] = dsc;
  j["num_pred"] = iou.rows();
  j["num_gt"] = iou.cols();
  j["pred_ids"] = iou.pred_ids;
  j["gt_ids"] = iou.gt_ids;
  nlohmann::json rows = nlohmann::json::array();
  for (std::int64_t i = 0; i < iou.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::int64_t k = 0; k < iou.cols(); ++k) row.push_back(iou.at(i, k));
    rows.push_back(std::move(row));
  }
  j["iou_matrix"] = std::move(rows);
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : matches) ms.push_back({{"pred", m.pred}, {"gt", m.gt}, {"iou", m.iou}});
  j["matches"] = std::move(ms);
  return j;
}

MetricReport evaluate(const LabelVolume& pred, std::span<const double> scores,
                      const LabelVolume& gt) {
  MetricReport r;
  r.iou = iou_matrix(pred, gt);
  const ApResult ap = average_precision(r.iou, scores, 0.75);
  r.ap75 = ap.ap;
  r.matches = ap.matches;
  std::vector<std::uint8_t> p(pred.labels.size()), g(gt.labels.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = pred.labels[i] != 0;
    g[i] = gt.labels[i] != 0;
  }
  const JaccardDsc jd = jaccard_dsc(p, g);
  r.jaccard = jd.jaccard;
  r.dsc = jd.dsc;
  return r;
}

template std::vector<double> instance_scores(const LabelVolume&, std::span<const float>);
template std::vector<double> instance_scores(const LabelVolume&, std::span<const double>);

}  // namespace stt::metrics
