// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/data/patches.hpp"

#include <algorithm>
#include <string>

#include "stt/core/error.hpp"

namespace stt::data {

namespace {

std::string ext_str(const Extents3& e) {
  return "(" + std::to_string(e[0]) + ", " + std::to_string(e[1]) + ", " + std::to_string(e[2]) + ")";
}

template <typename V>
void permute(V& values, const Extents3& src_dims, const Extents3& dst_dims,
             auto&& source_index) {
  V out(values.size());
  std::size_t i = 0;
  for (std::int64_t t = 0; t < dst_dims[0]; ++t)
    for (std::int64_t h = 0; h < dst_dims[1]; ++h)
      for (std::int64_t w = 0; w < dst_dims[2]; ++w) {
        const auto [st, sh, sw] = source_index(t, h, w);
        out[i++] = values[static_cast<std::size_t>((st * src_dims[1] + sh) * src_dims[2] + sw)];
      }
  values = std::move(out);
}

bool has_foreground(const LabelVolume& l) {
  return std::any_of(l.labels.begin(), l.labels.end(), [](std::uint32_t v) { return v != 0; });
}

}  // namespace

VolumePatch crop(const ImageVolume& img, const LabelVolume& labels, Extents3 corner,
                 Extents3 dims) {
  if (img.dims != labels.dims) {
    throw ShapeError("crop: image dims " + ext_str(img.dims) + " differ from label dims " +
                     ext_str(labels.dims));
  }
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0 || corner[a] < 0 || corner[a] + dims[a] > img.dims[a]) {
      throw ShapeError("crop: block at " + ext_str(corner) + " of size " + ext_str(dims) +
                       " does not fit volume " + ext_str(img.dims));
    }
  }
  VolumePatch p;
  p.dims = dims;
  p.corner = corner;
  p.voxel_size_nm = img.voxel_size_nm;
  p.image.resize(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]));
  p.labels = LabelVolume(dims);
  std::size_t i = 0;
  for (std::int64_t t = 0; t < dims[0]; ++t)
    for (std::int64_t h = 0; h < dims[1]; ++h) {
      const auto src = static_cast<std::size_t>(labels.index(corner[0] + t, corner[1] + h, corner[2]));
      std::copy_n(img.values.begin() + static_cast<std::ptrdiff_t>(src), dims[2],
                  p.image.begin() + static_cast<std::ptrdiff_t>(i));
      std::copy_n(labels.labels.begin() + static_cast<std::ptrdiff_t>(src), dims[2],
                  p.labels.labels.begin() + static_cast<std::ptrdiff_t>(i));
      i += static_cast<std::size_t>(dims[2]);
    }
  return p;
}

VolumePatch sample_patch(const ImageVolume& img, const LabelVolume& labels, Extents3 dims,
                         Rng& rng, double rebalance, int max_tries) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0 || dims[a] > img.dims[a]) {
      throw ShapeError("sample_patch: patch " + ext_str(dims) + " does not fit volume " +
                       ext_str(img.dims));
    }
  }
  auto draw = [&] {
    Extents3 c{};
    for (int a = 0; a < 3; ++a) {
      std::uniform_int_distribution<std::int64_t> d(0, img.dims[a] - dims[a]);
      c[a] = d(rng);
    }
    return crop(img, labels, c, dims);
  };
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  VolumePatch p = draw();
  if (u01(rng) >= rebalance) return p;
  for (int k = 1; k < max_tries && !has_foreground(p.labels); ++k) p = draw();
  return p;
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.flip_h = c.flip_w = c.rot90 = c.flip_t = c.intensity = c.noise = 0.0;
  return c;
}

AugmentConfig AugmentConfig::geometric_only() {
  AugmentConfig c;
  c.intensity = c.noise = 0.0;
  return c;
}

void flip_axis(VolumePatch& p, int axis) {
  if (axis < 0 || axis > 2) throw ValidationError("flip_axis: axis must be 0, 1 or 2");
  const Extents3 d = p.dims;
  auto src = [&](std::int64_t t, std::int64_t h, std::int64_t w) {
    Extents3 s{t, h, w};
    s[axis] = d[axis] - 1 - s[axis];
    return s;
  };
  permute(p.image, d, d, src);
  permute(p.labels.labels, d, d, src);
}

void rotate90(VolumePatch& p) {
  if (p.dims[1] != p.dims[2]) {
    throw ShapeError("rotate90: needs a square in-plane extent, got " + ext_str(p.dims));
  }
  const Extents3 d = p.dims;
  auto src = [&](std::int64_t t, std::int64_t h, std::int64_t w) {
    return Extents3{t, w, d[1] - 1 - h};
  };
  permute(p.image, d, d, src);
  permute(p.labels.labels, d, d, src);
}

void augment(VolumePatch& p, Rng& rng, const AugmentConfig& cfg) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // Fixed number of draws per call.
  const bool fh = u01(rng) < cfg.flip_h;
  const bool fw = u01(rng) < cfg.flip_w;
  const bool rot = u01(rng) < cfg.rot90;
  const bool ft = u01(rng) < cfg.flip_t;
  const bool jitter = u01(rng) < cfg.intensity;
  const double contrast = 1.0 + cfg.intensity_range * (2 * u01(rng) - 1);
  const double brightness = cfg.intensity_range * (2 * u01(rng) - 1);
  const bool noisy = u01(rng) < cfg.noise;
  const double sigma = cfg.noise_sigma_max * u01(rng);

  if (fh) flip_axis(p, 1);
  if (fw) flip_axis(p, 2);
  if (rot && p.dims[1] == p.dims[2]) rotate90(p);
  if (ft) flip_axis(p, 0);
  if (jitter) {
    double mean = 0;
    for (float v : p.image) mean += v;
    mean /= std::max<std::size_t>(1, p.image.size());
    for (auto& v : p.image) {
      v = static_cast<float>(std::clamp((v - mean) * contrast + mean + brightness, 0.0, 1.0));
    }
  }
  if (noisy && sigma > 0) {
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& v : p.image) v = static_cast<float>(std::clamp(v + n(rng), 0.0, 1.0));
  }
}

}  // namespace stt::data
