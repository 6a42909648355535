// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

namespace stt {

using Extents3 = std::array<std::int64_t, 3>;

/// Integer (T, H, W) volume, raster order with W fastest. 0 is background,
/// k >= 1 identifies instance k.
struct LabelVolume {
  Extents3 dims{0, 0, 0};
  std::vector<std::uint32_t> labels;

  LabelVolume() = default;
  explicit LabelVolume(Extents3 d, std::uint32_t fill = 0)
      : dims(d), labels(static_cast<std::size_t>(d[0] * d[1] * d[2]), fill) {}

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t index(std::int64_t t, std::int64_t h, std::int64_t w) const {
    return (t * dims[1] + h) * dims[2] + w;
  }
  std::uint32_t& at(std::int64_t t, std::int64_t h, std::int64_t w) {
    return labels[static_cast<std::size_t>(index(t, h, w))];
  }
  std::uint32_t at(std::int64_t t, std::int64_t h, std::int64_t w) const {
    return labels[static_cast<std::size_t>(index(t, h, w))];
  }
  std::uint32_t max_label() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  }
};

/// Labeled voxel with an in-plane 4-neighbour of a different label
/// (neighbours outside the volume do not count).
inline bool is_in_plane_edge(const LabelVolume& v, std::int64_t t, std::int64_t h,
                             std::int64_t w) {
  const std::uint32_t l = v.at(t, h, w);
  if (l == 0) return false;
  return (h > 0 && v.at(t, h - 1, w) != l) || (h + 1 < v.dims[1] && v.at(t, h + 1, w) != l) ||
         (w > 0 && v.at(t, h, w - 1) != l) || (w + 1 < v.dims[2] && v.at(t, h, w + 1) != l);
}

}  // namespace stt
