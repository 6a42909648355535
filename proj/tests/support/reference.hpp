// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

// Slow, direct reference implementations used as test oracles. They share no
// code with the library and work on plain row-major double arrays.

namespace stt::oracle {

using Vec = std::vector<double>;
using Dims = std::array<std::int64_t, 3>;

/// x [N,C,T,H,W], w [O,C,kT,kH,kW], b [O] (may be empty). Six nested loops
/// per output element.
Vec conv3d_loops(const Vec& x, std::int64_t n, std::int64_t c, Dims in, const Vec& w,
                 std::int64_t o, Dims k, const Vec& b, Dims stride, Dims pad, Dims* out_dims);

/// Tent-function form of trilinear interpolation of channel `ch` of
/// x [C,T,H,W] at (t, h, w): sum over all voxels of prod max(0, 1 - |d|).
double trilinear_point(const Vec& x, Dims dims, std::int64_t ch, double t, double h, double w);

/// x [T,H,W,C], projections [C,dk]. Returns [T,H,W,dk].
Vec spatial_attention_loops(const Vec& x, std::int64_t nt, std::int64_t nh, std::int64_t nw,
                            std::int64_t c, const Vec& wq, const Vec& wk, const Vec& wv,
                            std::int64_t dk);
Vec temporal_attention_loops(const Vec& x, std::int64_t nt, std::int64_t nh, std::int64_t nw,
                             std::int64_t c, const Vec& wq, const Vec& wk, const Vec& wv,
                             std::int64_t dk);

/// Maps [T,H,W,dk]; offset predictor weight [3K, dk] + bias [3K] with
/// channel 3*n + axis; kernel [O, dk, kT, kH, kW]. Returns [T,H,W,O].
Vec deformable_loops(const Vec& xs, const Vec& xt, std::int64_t nt, std::int64_t nh,
                     std::int64_t nw, std::int64_t dk, const Vec& off_w, const Vec& off_b,
                     const Vec& kernel, std::int64_t o, Dims k);

/// Breadth-first flood fill labeling in raster order of first voxel.
std::vector<std::int32_t> flood_fill_labels(const std::vector<std::uint8_t>& mask, Dims dims,
                                            int connectivity);
/// True when both labelings induce the same partition of the voxels.
bool same_partition(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b);

/// [num_pred, num_gt] IoUs from explicit voxel sets, labels 1..n.
Vec pairwise_iou(const std::vector<std::int32_t>& pred, std::int64_t num_pred,
                 const std::vector<std::int32_t>& gt, std::int64_t num_gt);

/// AP at IoU 0.75 by enumerating every score cut-off: greedy matching in
/// score order, then interpolated precision sampled at each recall level
/// k / num_gt.
double ap75_enumerated(const std::vector<std::int32_t>& pred, std::int64_t num_pred,
                       const Vec& scores, const std::vector<std::int32_t>& gt,
                       std::int64_t num_gt);

}  // namespace stt::oracle
