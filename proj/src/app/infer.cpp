// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/app/infer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "stt/app/trainer.hpp"
#include "stt/core/ops.hpp"
#include "stt/metrics/metrics.hpp"

namespace stt::app {

namespace fs = std::filesystem;

std::vector<std::int64_t> tile_starts(std::int64_t extent, std::int64_t patch) {
  if (patch <= 0 || extent < patch) {
    throw ShapeError("tile_starts: extent " + std::to_string(extent) + " is smaller than patch " +
                     std::to_string(patch));
  }
  const std::int64_t stride = std::max<std::int64_t>(1, patch / 2);
  std::vector<std::int64_t> s;
  for (std::int64_t o = 0; o + patch <= extent; o += stride) s.push_back(o);
  if (s.back() + patch < extent) s.push_back(extent - patch);
  return s;
}

std::vector<double> cosine_window(std::int64_t n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) /
                              static_cast<double>(n + 1)));
  }
  return w;
}

template <typename T>
Prediction<T> sliding_window(const data::ImageVolume& img, Extents3 patch, const TileFn<T>& fn) {
  const Extents3 d = img.dims;
  std::array<std::vector<std::int64_t>, 3> starts;
  std::array<std::vector<double>, 3> win;
  for (int a = 0; a < 3; ++a) {
    if (d[a] < patch[a]) {
      throw ShapeError("inference: volume extent " + std::to_string(d[a]) + " along axis " +
                       std::to_string(a) + " is smaller than the patch (" +
                       std::to_string(patch[a]) + ")");
    }
    starts[a] = tile_starts(d[a], patch[a]);
    win[a] = starts[a].size() == 1 ? std::vector<double>(static_cast<std::size_t>(patch[a]), 1.0)
                                   : cosine_window(patch[a]);
  }
  const std::int64_t pv = patch[0] * patch[1] * patch[2];
  const std::size_t nv = img.values.size();
  Prediction<T> out;
  out.dims = d;
  std::vector<T> tile(static_cast<std::size_t>(pv)), sem, bnd;

  auto run = [&](const Extents3& c) {
    std::size_t i = 0;
    for (std::int64_t t = 0; t < patch[0]; ++t)
      for (std::int64_t h = 0; h < patch[1]; ++h)
        for (std::int64_t w = 0; w < patch[2]; ++w) {
          tile[i++] = static_cast<T>(img.values[static_cast<std::size_t>(
              ((c[0] + t) * d[1] + c[1] + h) * d[2] + c[2] + w)]);
        }
    sem.assign(static_cast<std::size_t>(pv), T(0));
    bnd.assign(static_cast<std::size_t>(pv), T(0));
    fn(tile, sem, bnd);
    ++out.tiles;
  };

  if (d == patch) {
    run({0, 0, 0});
    out.semantic = sem;
    out.boundary = bnd;
    return out;
  }
  std::vector<double> acc_s(nv, 0.0), acc_b(nv, 0.0), acc_w(nv, 0.0);
  for (const auto t0 : starts[0])
    for (const auto h0 : starts[1])
      for (const auto w0 : starts[2]) {
        run({t0, h0, w0});
        std::size_t i = 0;
        for (std::int64_t t = 0; t < patch[0]; ++t)
          for (std::int64_t h = 0; h < patch[1]; ++h)
            for (std::int64_t w = 0; w < patch[2]; ++w, ++i) {
              const double wt = win[0][static_cast<std::size_t>(t)] *
                                win[1][static_cast<std::size_t>(h)] *
                                win[2][static_cast<std::size_t>(w)];
              const auto g = static_cast<std::size_t>(((t0 + t) * d[1] + h0 + h) * d[2] + w0 + w);
              acc_s[g] += wt * static_cast<double>(sem[i]);
              acc_b[g] += wt * static_cast<double>(bnd[i]);
              acc_w[g] += wt;
            }
      }
  out.semantic.resize(nv);
  out.boundary.resize(nv);
  for (std::size_t g = 0; g < nv; ++g) {
    out.semantic[g] = static_cast<T>(acc_s[g] / acc_w[g]);
    out.boundary[g] = static_cast<T>(acc_b[g] / acc_w[g]);
  }
  return out;
}

template <typename T>
Prediction<T> predict_volume(const model::SttUnet<T>& m, const data::ImageVolume& img) {
  const Extents3 patch = m.config().patch;
  return sliding_window<T>(img, patch,
                           [&](const std::vector<T>& tile, std::vector<T>& sem, std::vector<T>& bnd) {
                             const Tensor<T> x({1, 1, patch[0], patch[1], patch[2]}, tile);
                             const auto o = m.forward(x);
                             const Tensor<T> ps = sigmoid(o.semantic_logits);
                             const Tensor<T> pb = sigmoid(o.boundary_logits);
                             sem.assign(ps.data().begin(), ps.data().end());
                             bnd.assign(pb.data().begin(), pb.data().end());
                           });
}

template <typename T>
InferResult infer_volume(const model::SttUnet<T>& m, const data::ImageVolume& img,
                         const post::PostConfig& cfg) {
  const Prediction<T> p = predict_volume(m, img);
  InferResult r;
  r.tiles = p.tiles;
  r.labels = post::extract_instances<T>(p.semantic, p.boundary, p.dims, cfg);
  r.scores = metrics::instance_scores<T>(r.labels, p.semantic);
  return r;
}

InferResult infer_with_checkpoint(const fs::path& ckpt, const data::ImageVolume& img) {
  const Checkpoint ck = load_checkpoint(ckpt);
  ExperimentConfig cfg;
  const std::string precision = ck.manifest.at("metadata").value("precision", "float32");
  if (parse_precision(precision) == Precision::kFloat32) {
    const auto m = load_model<float>(ck, &cfg);
    return infer_volume(m, img, cfg.post);
  }
  const auto m = load_model<double>(ck, &cfg);
  return infer_volume(m, img, cfg.post);
}

namespace {

fs::path scores_path(const fs::path& labels_path) {
  fs::path p = data::volume_stem(labels_path);
  p += ".scores.json";
  return p;
}

}  // namespace

void write_inference(const fs::path& out, const InferResult& r, const data::VoxelSize& voxel_size) {
  data::save_labels(out, r.labels, voxel_size);
  std::ofstream s(scores_path(out));
  if (!s) throw IoError("cannot write " + scores_path(out).string());
  s << nlohmann::json{{"scores", r.scores}}.dump() << "\n";
}

std::vector<double> read_scores(const fs::path& labels_path) {
  std::ifstream in(scores_path(labels_path));
  if (!in) return {};
  try {
    return nlohmann::json::parse(in).at("scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed scores file " + scores_path(labels_path).string() + ": " + e.what());
  }
}

template Prediction<float> sliding_window<float>(const data::ImageVolume&, Extents3,
                                                 const TileFn<float>&);
template Prediction<double> sliding_window<double>(const data::ImageVolume&, Extents3,
                                                   const TileFn<double>&);
template Prediction<float> predict_volume<float>(const model::SttUnet<float>&,
                                                 const data::ImageVolume&);
template Prediction<double> predict_volume<double>(const model::SttUnet<double>&,
                                                   const data::ImageVolume&);
template InferResult infer_volume<float>(const model::SttUnet<float>&, const data::ImageVolume&,
                                         const post::PostConfig&);
template InferResult infer_volume<double>(const model::SttUnet<double>&, const data::ImageVolume&,
                                          const post::PostConfig&);

}  // namespace stt::app
