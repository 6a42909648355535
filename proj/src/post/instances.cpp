// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/post/instances.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "stt/core/error.hpp"

namespace stt::post {

void PostConfig::validate() const {
  if (!(semantic_threshold > 0 && semantic_threshold < 1) ||
      !(boundary_threshold > 0 && boundary_threshold < 1)) {
    throw ValidationError("post: thresholds must lie in (0, 1)");
  }
  if (connectivity != 6 && connectivity != 26) {
    throw ValidationError("post: connectivity must be 6 or 26, got " +
                          std::to_string(connectivity));
  }
  if (min_size < 0) throw ValidationError("post: min_size must be >= 0");
}

std::vector<std::array<int, 3>> neighbour_offsets(int connectivity) {
  std::vector<std::array<int, 3>> out;
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      for (int c = -1; c <= 1; ++c) {
        const int manhattan = std::abs(a) + std::abs(b) + std::abs(c);
        if (manhattan == 0) continue;
        if (connectivity == 6 && manhattan != 1) continue;
        out.push_back({a, b, c});
      }
    }
  }
  return out;
}

template <typename T>
std::vector<std::uint8_t> seed_mask(std::span<const T> sem, std::span<const T> bnd,
                                    const PostConfig& cfg) {
  if (sem.size() != bnd.size()) throw ShapeError("seed_mask: semantic/boundary size mismatch");
  std::vector<std::uint8_t> out(sem.size());
  for (std::size_t i = 0; i < sem.size(); ++i) {
    out[i] = sem[i] > cfg.semantic_threshold && bnd[i] < cfg.boundary_threshold;
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent{0};

  std::uint32_t make() {
    parent.push_back(static_cast<std::uint32_t>(parent.size()));
    return parent.back();
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a < b) parent[b] = a;
    else if (b < a) parent[a] = b;
  }
};

void check_dims(std::size_t n, Extents3 dims, const char* what) {
  if (static_cast<std::int64_t>(n) != dims[0] * dims[1] * dims[2]) {
    throw ShapeError(std::string(what) + ": " + std::to_string(n) +
                     " voxels do not match the extents");
  }
}

}  // namespace

LabelVolume connected_components_3d(std::span<const std::uint8_t> mask, Extents3 dims,
                                    int connectivity) {
  if (connectivity != 6 && connectivity != 26) {
    throw ValidationError("connectivity must be 6 or 26");
  }
  check_dims(mask.size(), dims, "connected_components_3d");
  // neighbours already visited in raster order
  std::vector<std::array<int, 3>> back;
  for (const auto& o : neighbour_offsets(connectivity)) {
    if (o[0] < 0 || (o[0] == 0 && (o[1] < 0 || (o[1] == 0 && o[2] < 0)))) back.push_back(o);
  }
  LabelVolume out(dims);
  UnionFind uf;
  const auto [nt, nh, nw] = dims;
  for (std::int64_t t = 0; t < nt; ++t) {
    for (std::int64_t h = 0; h < nh; ++h) {
      for (std::int64_t w = 0; w < nw; ++w) {
        const std::int64_t i = out.index(t, h, w);
        if (!mask[static_cast<std::size_t>(i)]) continue;
        std::uint32_t label = 0;
        for (const auto& o : back) {
          const std::int64_t tt = t + o[0], hh = h + o[1], ww = w + o[2];
          if (tt < 0 || hh < 0 || ww < 0 || hh >= nh || ww >= nw) continue;
          const std::uint32_t l = out.at(tt, hh, ww);
          if (l == 0) continue;
          if (label == 0) label = l;
          else uf.unite(label, l);
        }
        out.labels[static_cast<std::size_t>(i)] = label ? label : uf.make();
      }
    }
  }
  std::vector<std::uint32_t> final_id(uf.parent.size(), 0);
  std::uint32_t next = 0;
  for (auto& l : out.labels) {
    if (l == 0) continue;
    const std::uint32_t root = uf.find(l);
    if (final_id[root] == 0) final_id[root] = ++next;
    l = final_id[root];
  }
  return out;
}

LabelVolume remove_small_and_compact(const LabelVolume& labels, std::int64_t min_size) {
  const std::uint32_t n = labels.max_label();
  std::vector<std::int64_t> size(static_cast<std::size_t>(n) + 1, 0);
  for (const auto l : labels.labels) ++size[l];
  std::vector<std::uint32_t> remap(size.size(), 0);
  std::uint32_t next = 0;
  for (std::uint32_t l = 1; l <= n; ++l) {
    if (size[l] > 0 && size[l] >= min_size) remap[l] = ++next;
  }
  LabelVolume out = labels;
  for (auto& l : out.labels) l = remap[l];
  return out;
}

template <typename T>
LabelVolume grow_instances(const LabelVolume& seeds, std::span<const T> sem,
                           const PostConfig& cfg) {
  check_dims(sem.size(), seeds.dims, "grow_instances");
  const auto offsets = neighbour_offsets(cfg.connectivity);
  LabelVolume out = seeds;
  const auto [nt, nh, nw] = seeds.dims;
  std::vector<std::int64_t> frontier;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    if (out.labels[static_cast<std::size_t>(i)] != 0) frontier.push_back(i);
  }
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> pending(out.labels.size(), kNone);
  std::vector<std::int64_t> next;
  while (!frontier.empty()) {
    next.clear();
    for (const std::int64_t i : frontier) {
      const std::uint32_t l = out.labels[static_cast<std::size_t>(i)];
      const std::int64_t t = i / (nh * nw), h = (i / nw) % nh, w = i % nw;
      for (const auto& o : offsets) {
        const std::int64_t tt = t + o[0], hh = h + o[1], ww = w + o[2];
        if (tt < 0 || hh < 0 || ww < 0 || tt >= nt || hh >= nh || ww >= nw) continue;
        const std::int64_t j = out.index(tt, hh, ww);
        const auto js = static_cast<std::size_t>(j);
        if (out.labels[js] != 0 || !(sem[js] > cfg.semantic_threshold)) continue;
        if (pending[js] == kNone) next.push_back(j);
        pending[js] = std::min(pending[js], l);
      }
    }
    for (const std::int64_t j : next) {
      const auto js = static_cast<std::size_t>(j);
      out.labels[js] = pending[js];
      pending[js] = kNone;
    }
    std::swap(frontier, next);
  }
  return remove_small_and_compact(out, cfg.min_size);
}

template <typename T>
LabelVolume extract_instances(std::span<const T> sem, std::span<const T> bnd, Extents3 dims,
                              const PostConfig& cfg) {
  cfg.validate();
  const auto seeds = seed_mask(sem, bnd, cfg);
  return grow_instances(connected_components_3d(seeds, dims, cfg.connectivity), sem, cfg);
}

#define STT_INSTANTIATE(T)                                                                 \
  template std::vector<std::uint8_t> seed_mask(std::span<const T>, std::span<const T>,     \
                                               const PostConfig&);                          \
  template LabelVolume grow_instances(const LabelVolume&, std::span<const T>,              \
                                      const PostConfig&);                                   \
  template LabelVolume extract_instances(std::span<const T>, std::span<const T>, Extents3, \
                                         const PostConfig&);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

}  // namespace stt::post
