// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "stt/core/error.hpp"
#include "stt/core/label_volume.hpp"
#include "stt/data/volume_io.hpp"

namespace stt::data {

/// No placement found for the requested instances within the retry budget.
class PackingError : public Error {
 public:
  using Error::Error;
};

struct SynthSpec {
  Extents3 dims{8, 64, 64};
  std::int64_t min_instances = 3;
  std::int64_t max_instances = 6;
  // semi-axis ranges in voxels: slice axis, long in-plane axis, short in-plane axis
  std::array<double, 2> axis_t{2.0, 4.0};
  std::array<double, 2> axis_long{6.0, 12.0};
  std::array<double, 2> axis_short{3.5, 6.0};
  double max_bend = 0.4;  // bend of the long axis, in short-axis units at the tips
  double noise_sigma = 0.03;
  double touch_probability = 0.0;
  bool distractors = false;
  std::int64_t distractor_count = 12;
  std::int64_t max_retries = 200;  // per instance
  std::int64_t min_instance_voxels = 40;

  double background = 0.7;
  double interior = 0.2;
  double rim = 0.45;
  double distractor_intensity = 0.42;

  /// dims >= (8, 32, 32), counts >= 1, ordered ranges. Throws ValidationError.
  void validate() const;
};

struct SyntheticVolume {
  ImageVolume image;
  LabelVolume labels;
};

/// Bent ellipsoids with a darker interior and a brighter rim on a textured
/// background, plus Gaussian noise; fully determined by (spec, seed).
SyntheticVolume generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Largest intensity of the noiseless foreground; background voxels without
/// distractors lie above it.
double foreground_ceiling(const SynthSpec& spec);

}  // namespace stt::data
