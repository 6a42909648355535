// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/data/synthetic.hpp"

#include "stt/data/patches.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace stt::data {

void SynthSpec::validate() const {
  if (dims[0] < 8 || dims[1] < 32 || dims[2] < 32) {
    throw ValidationError("synth: dims must be at least (8, 32, 32)");
  }
  if (min_instances < 1 || max_instances < min_instances) {
    throw ValidationError("synth: need 1 <= min_instances <= max_instances");
  }
  for (const auto& r : {axis_t, axis_long, axis_short}) {
    if (!(r[0] > 0) || r[1] < r[0]) throw ValidationError("synth: axis ranges must be positive and ordered");
  }
  if (max_bend < 0 || noise_sigma < 0 || touch_probability < 0 || touch_probability > 1) {
    throw ValidationError("synth: max_bend, noise_sigma >= 0 and touch_probability in [0, 1]");
  }
  if (max_retries < 1 || distractor_count < 0 || min_instance_voxels < 1) {
    throw ValidationError("synth: max_retries, min_instance_voxels >= 1, distractor_count >= 0");
  }
}

double foreground_ceiling(const SynthSpec& spec) {
  return std::max(spec.rim, spec.interior + 0.1);
}

namespace {

constexpr double kTextureAmplitude = 0.04;

struct Candidate {
  std::vector<std::int64_t> voxels;
  std::vector<double> radius2;  // normalized ellipsoid radius squared per voxel
  double ct = 0, ch = 0, cw = 0;
  double reach = 0;  // in-plane extent from the centre
};

// Keeps the largest 26-connected piece of a rasterized shape.
void keep_largest_piece(Candidate& c, const Extents3& dims) {
  if (c.voxels.empty()) return;
  std::vector<std::int64_t> order(c.voxels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
  std::vector<std::int64_t> sorted = c.voxels;
  std::sort(sorted.begin(), sorted.end());
  auto find = [&](std::int64_t v) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    return (it != sorted.end() && *it == v) ? it - sorted.begin() : -1;
  };
  std::vector<int> piece(sorted.size(), -1);
  int best = -1, best_size = 0, next = 0;
  for (std::size_t s = 0; s < sorted.size(); ++s) {
    if (piece[s] >= 0) continue;
    int size = 0;
    std::vector<std::size_t> stack{s};
    piece[s] = next;
    while (!stack.empty()) {
      const std::int64_t v = sorted[stack.back()];
      stack.pop_back();
      ++size;
      const std::int64_t t = v / (dims[1] * dims[2]), h = (v / dims[2]) % dims[1], w = v % dims[2];
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
          for (int d = -1; d <= 1; ++d) {
            const std::int64_t tt = t + a, hh = h + b, ww = w + d;
            if (tt < 0 || hh < 0 || ww < 0 || tt >= dims[0] || hh >= dims[1] || ww >= dims[2]) continue;
            const auto k = find((tt * dims[1] + hh) * dims[2] + ww);
            if (k >= 0 && piece[static_cast<std::size_t>(k)] < 0) {
              piece[static_cast<std::size_t>(k)] = next;
              stack.push_back(static_cast<std::size_t>(k));
            }
          }
    }
    if (size > best_size) {
      best_size = size;
      best = next;
    }
    ++next;
  }
  Candidate kept = c;
  kept.voxels.clear();
  kept.radius2.clear();
  for (std::size_t i = 0; i < c.voxels.size(); ++i) {
    if (piece[static_cast<std::size_t>(find(c.voxels[i]))] == best) {
      kept.voxels.push_back(c.voxels[i]);
      kept.radius2.push_back(c.radius2[i]);
    }
  }
  c = std::move(kept);
}

Candidate rasterize(const SynthSpec& spec, Rng& rng, double ct, double ch, double cw) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto in = [&](const std::array<double, 2>& r) { return r[0] + (r[1] - r[0]) * u01(rng); };
  const double at = in(spec.axis_t), al = in(spec.axis_long), as = in(spec.axis_short);
  const double theta = std::numbers::pi * u01(rng);
  const double bend = spec.max_bend * (2 * u01(rng) - 1);
  const double ct_ = ct, ch_ = ch, cw_ = cw;
  Candidate c;
  c.ct = ct_;
  c.ch = ch_;
  c.cw = cw_;
  c.reach = std::max(al, as) + std::abs(bend) * as + 1;
  const auto& d = spec.dims;
  const double cs = std::cos(theta), sn = std::sin(theta);
  for (auto t = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(ct - at)));
       t <= std::min<std::int64_t>(d[0] - 1, static_cast<std::int64_t>(std::ceil(ct + at))); ++t) {
    for (auto h = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(ch - c.reach)));
         h <= std::min<std::int64_t>(d[1] - 1, static_cast<std::int64_t>(std::ceil(ch + c.reach))); ++h) {
      for (auto w = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cw - c.reach)));
           w <= std::min<std::int64_t>(d[2] - 1, static_cast<std::int64_t>(std::ceil(cw + c.reach))); ++w) {
        const double dt = (static_cast<double>(t) - ct) / at;
        const double dx = static_cast<double>(h) - ch, dy = static_cast<double>(w) - cw;
        const double un = (dx * cs + dy * sn) / al;
        const double vn = (-dx * sn + dy * cs) / as - bend * un * un;
        const double r2 = un * un + vn * vn + dt * dt;
        if (r2 <= 1.0) {
          c.voxels.push_back((t * d[1] + h) * d[2] + w);
          c.radius2.push_back(r2);
        }
      }
    }
  }
  keep_largest_piece(c, d);
  return c;
}

// Free of labeled voxels; with `gap`, also of labeled 26-neighbours.
bool fits(const Candidate& c, const LabelVolume& lab, bool gap) {
  const auto& d = lab.dims;
  for (const std::int64_t v : c.voxels) {
    if (lab.labels[static_cast<std::size_t>(v)] != 0) return false;
    if (!gap) continue;
    const std::int64_t t = v / (d[1] * d[2]), h = (v / d[2]) % d[1], w = v % d[2];
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int e = -1; e <= 1; ++e) {
          const std::int64_t tt = t + a, hh = h + b, ww = w + e;
          if (tt < 0 || hh < 0 || ww < 0 || tt >= d[0] || hh >= d[1] || ww >= d[2]) continue;
          if (lab.at(tt, hh, ww) != 0) return false;
        }
  }
  return true;
}

void paint_distractors(const SynthSpec& spec, const LabelVolume& lab, std::vector<float>& img,
                       Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto& d = lab.dims;
  auto paint = [&](std::int64_t t, std::int64_t h, std::int64_t w) {
    if (t < 0 || h < 0 || w < 0 || t >= d[0] || h >= d[1] || w >= d[2]) return;
    if (lab.at(t, h, w) != 0) return;
    img[static_cast<std::size_t>(lab.index(t, h, w))] = static_cast<float>(spec.distractor_intensity);
  };
  for (std::int64_t k = 0; k < spec.distractor_count; ++k) {
    const double ct = u01(rng) * static_cast<double>(d[0]);
    const double ch = u01(rng) * static_cast<double>(d[1]);
    const double cw = u01(rng) * static_cast<double>(d[2]);
    if (k % 2 == 0) {
      // small dark blob
      const double r = 1.0 + 1.5 * u01(rng), rt = 0.5 + u01(rng);
      for (auto t = static_cast<std::int64_t>(ct - rt); t <= static_cast<std::int64_t>(ct + rt); ++t)
        for (auto h = static_cast<std::int64_t>(ch - r); h <= static_cast<std::int64_t>(ch + r); ++h)
          for (auto w = static_cast<std::int64_t>(cw - r); w <= static_cast<std::int64_t>(cw + r); ++w) {
            const double a = (static_cast<double>(t) - ct) / rt, b = (static_cast<double>(h) - ch) / r,
                         e = (static_cast<double>(w) - cw) / r;
            if (a * a + b * b + e * e <= 1.0) paint(t, h, w);
          }
    } else {
      // thin membrane-like line across a few slices
      const double angle = std::numbers::pi * u01(rng);
      const double len = 8.0 + 10.0 * u01(rng);
      const auto t0 = static_cast<std::int64_t>(ct);
      for (double s = -len / 2; s <= len / 2; s += 0.5) {
        const auto h = static_cast<std::int64_t>(std::lround(ch + s * std::cos(angle)));
        const auto w = static_cast<std::int64_t>(std::lround(cw + s * std::sin(angle)));
        for (std::int64_t t = t0; t < t0 + 3; ++t) paint(t, h, w);
      }
    }
  }
}

}  // namespace

SyntheticVolume generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto& d = spec.dims;
  LabelVolume lab(d);
  std::vector<float> shade(static_cast<std::size_t>(lab.size()), 0.0f);
  std::vector<Candidate> placed;

  std::uniform_int_distribution<std::int64_t> count_dist(spec.min_instances, spec.max_instances);
  const std::int64_t target = count_dist(rng);
  for (std::int64_t k = 1; k <= target; ++k) {
    bool ok = false;
    for (std::int64_t attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
      const bool touch = !placed.empty() && u01(rng) < spec.touch_probability;
      double ct, ch, cw;
      if (touch) {
        const Candidate& other = placed[static_cast<std::size_t>(rng() % placed.size())];
        const double phi = 2 * std::numbers::pi * u01(rng);
        const double dist = other.reach * (0.6 + 0.5 * u01(rng)) + spec.axis_short[0];
        ct = other.ct;
        ch = other.ch + dist * std::cos(phi);
        cw = other.cw + dist * std::sin(phi);
      } else {
        ct = u01(rng) * static_cast<double>(d[0] - 1);
        ch = u01(rng) * static_cast<double>(d[1] - 1);
        cw = u01(rng) * static_cast<double>(d[2] - 1);
      }
      Candidate c = rasterize(spec, rng, ct, ch, cw);
      if (static_cast<std::int64_t>(c.voxels.size()) < spec.min_instance_voxels) continue;
      if (!fits(c, lab, !touch)) continue;
      for (std::size_t i = 0; i < c.voxels.size(); ++i) {
        lab.labels[static_cast<std::size_t>(c.voxels[i])] = static_cast<std::uint32_t>(k);
        shade[static_cast<std::size_t>(c.voxels[i])] = static_cast<float>(c.radius2[i]);
      }
      placed.push_back(std::move(c));
      ok = true;
    }
    if (!ok) {
      if (k - 1 >= spec.min_instances) break;
      throw PackingError("synth: could not place instance " + std::to_string(k) + " of " +
                         std::to_string(target) + " within " + std::to_string(spec.max_retries) +
                         " attempts; enlarge dims or shrink the axis ranges");
    }
  }

  // background texture: a few low-frequency in-plane waves
  std::vector<std::array<double, 4>> waves;
  for (int i = 0; i < 3; ++i) {
    waves.push_back({2 * std::numbers::pi * (0.5 + 1.5 * u01(rng)) / static_cast<double>(d[1]),
                     2 * std::numbers::pi * (0.5 + 1.5 * u01(rng)) / static_cast<double>(d[2]),
                     2 * std::numbers::pi * u01(rng), 0.0});
  }
  std::vector<float> img(static_cast<std::size_t>(lab.size()));
  for (std::int64_t t = 0; t < d[0]; ++t) {
    for (std::int64_t h = 0; h < d[1]; ++h) {
      for (std::int64_t w = 0; w < d[2]; ++w) {
        const auto i = static_cast<std::size_t>(lab.index(t, h, w));
        double v;
        if (lab.labels[i] != 0) {
          v = is_in_plane_edge(lab, t, h, w) ? spec.rim : spec.interior + 0.1 * shade[i];
        } else {
          double tex = 0;
          for (const auto& wv : waves) {
            tex += std::sin(wv[0] * static_cast<double>(h) + wv[1] * static_cast<double>(w) + wv[2]);
          }
          v = spec.background + kTextureAmplitude * tex / 3.0;
        }
        img[i] = static_cast<float>(v);
      }
    }
  }
  if (spec.distractors) paint_distractors(spec, lab, img, rng);
  if (spec.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : img) v = static_cast<float>(std::clamp(static_cast<double>(v) + noise(rng), 0.0, 1.0));
  }
  SyntheticVolume out;
  out.image = ImageVolume{d, {30.0, 8.0, 8.0}, std::move(img)};
  out.labels = std::move(lab);
  return out;
}

}  // namespace stt::data
