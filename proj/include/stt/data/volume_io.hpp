// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "stt/core/error.hpp"
#include "stt/core/label_volume.hpp"

// Volume files: `<stem>.json` sidecar
//   {"dims": [T, H, W], "dtype": "f32" | "u8" | "u32",
//    "voxel_size_nm": [z, y, x], "byte_order": "little-endian"}
// and `<stem>.raw` holding the voxels in T, H, W order (W fastest).

namespace stt::data {

/// Raw length differs from dims * dtype width.
class LengthMismatchError : public IoError {
 public:
  using IoError::IoError;
};

class UnknownDtypeError : public IoError {
 public:
  using IoError::IoError;
};

/// Sidecar missing, unparsable, or with missing / ill-typed fields.
class MalformedSidecarError : public IoError {
 public:
  using IoError::IoError;
};

enum class DType { kF32, kU8, kU32 };

std::string to_string(DType d);
/// Throws UnknownDtypeError.
DType parse_dtype(const std::string& s);
std::size_t dtype_width(DType d);

using VoxelSize = std::array<double, 3>;  // nm, (z, y, x)

struct VolumeFile {
  Extents3 dims{0, 0, 0};
  VoxelSize voxel_size_nm{30.0, 8.0, 8.0};
  std::variant<std::vector<float>, std::vector<std::uint8_t>, std::vector<std::uint32_t>> data;

  DType dtype() const;
  std::int64_t voxels() const { return dims[0] * dims[1] * dims[2]; }
};

/// Strips `.json` / `.raw` so either file or the bare stem names the volume.
std::filesystem::path volume_stem(const std::filesystem::path& path);

void save_volume(const std::filesystem::path& path, const VolumeFile& v);
VolumeFile load_volume(const std::filesystem::path& path);

/// Grayscale image in [0, 1] (u8 divided by 255, f32 as stored).
struct ImageVolume {
  Extents3 dims{0, 0, 0};
  VoxelSize voxel_size_nm{30.0, 8.0, 8.0};
  std::vector<float> values;
};

ImageVolume load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const ImageVolume& img);
/// Accepts u8 and u32 files.
LabelVolume load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelVolume& labels,
                 VoxelSize voxel_size_nm = {30.0, 8.0, 8.0});

}  // namespace stt::data
