// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/data/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace stt::data {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DType d) {
  switch (d) {
    case DType::kF32: return "f32";
    case DType::kU8: return "u8";
    case DType::kU32: return "u32";
  }
  return "?";
}

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "u8") return DType::kU8;
  if (s == "u32") return DType::kU32;
  throw UnknownDtypeError("unknown volume dtype '" + s + "' (expected f32|u8|u32)");
}

std::size_t dtype_width(DType d) { return d == DType::kU8 ? 1 : 4; }

DType VolumeFile::dtype() const {
  return static_cast<DType>(data.index());
}

fs::path volume_stem(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".raw") return fs::path(path).replace_extension();
  return path;
}

namespace {

fs::path with_ext(const fs::path& stem, const char* ext) {
  return fs::path(stem.string() + ext);
}

json sidecar(Extents3 dims, DType dtype, const VoxelSize& vs) {
  return json{{"dims", {dims[0], dims[1], dims[2]}},
              {"dtype", to_string(dtype)},
              {"voxel_size_nm", {vs[0], vs[1], vs[2]}},
              {"byte_order", "little-endian"}};
}

struct Header {
  Extents3 dims;
  DType dtype;
  VoxelSize voxel_size;
  bool big_endian = false;
};

Header parse_sidecar(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw MalformedSidecarError("cannot open volume sidecar " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw MalformedSidecarError("sidecar " + file.string() + " is not valid JSON: " + e.what());
  }
  auto fail = [&](const std::string& what) {
    throw MalformedSidecarError("sidecar " + file.string() + ": " + what);
  };
  if (!j.is_object()) fail("top level must be an object");
  Header h{};
  if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 3) {
    fail("'dims' must be an array of 3 integers");
  }
  for (int a = 0; a < 3; ++a) {
    const auto& d = j["dims"][a];
    if (!d.is_number_integer() || d.get<std::int64_t>() <= 0) fail("'dims' entries must be positive integers");
    h.dims[a] = d.get<std::int64_t>();
  }
  if (!j.contains("dtype") || !j["dtype"].is_string()) fail("'dtype' must be a string");
  h.dtype = parse_dtype(j["dtype"].get<std::string>());
  h.voxel_size = {1.0, 1.0, 1.0};
  if (j.contains("voxel_size_nm")) {
    const auto& v = j["voxel_size_nm"];
    if (!v.is_array() || v.size() != 3) fail("'voxel_size_nm' must be an array of 3 numbers");
    for (int a = 0; a < 3; ++a) {
      if (!v[a].is_number()) fail("'voxel_size_nm' entries must be numbers");
      h.voxel_size[a] = v[a].get<double>();
    }
  } else {
    fail("'voxel_size_nm' is missing");
  }
  if (!j.contains("byte_order") || !j["byte_order"].is_string()) fail("'byte_order' must be a string");
  const auto bo = j["byte_order"].get<std::string>();
  if (bo == "big-endian") h.big_endian = true;
  else if (bo != "little-endian") fail("'byte_order' must be little-endian or big-endian, got '" + bo + "'");
  return h;
}

template <typename V>
void read_raw(const fs::path& file, std::int64_t voxels, bool swap, std::vector<V>& out) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open volume data " + file.string());
  const auto actual = static_cast<std::uint64_t>(in.tellg());
  const auto expected = static_cast<std::uint64_t>(voxels) * sizeof(V);
  if (actual != expected) {
    throw LengthMismatchError("volume data " + file.string() + " has " + std::to_string(actual) +
                              " bytes, expected " + std::to_string(expected));
  }
  in.seekg(0);
  out.resize(static_cast<std::size_t>(voxels));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected));
  if (!in) throw IoError("short read from " + file.string());
  if (swap && sizeof(V) > 1) {
    for (auto& v : out) {
      auto* b = reinterpret_cast<unsigned char*>(&v);
      std::reverse(b, b + sizeof(V));
    }
  }
}

}  // namespace

void save_volume(const fs::path& path, const VolumeFile& v) {
  const fs::path stem = volume_stem(path);
  const std::size_t n = std::visit([](const auto& d) { return d.size(); }, v.data);
  if (static_cast<std::int64_t>(n) != v.voxels()) {
    throw ShapeError("save_volume: " + std::to_string(n) + " voxels for dims " +
                     shape_str({v.dims[0], v.dims[1], v.dims[2]}));
  }
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  {
    std::ofstream out(with_ext(stem, ".raw"), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + with_ext(stem, ".raw").string());
    std::visit(
        [&](const auto& d) {
          out.write(reinterpret_cast<const char*>(d.data()),
                    static_cast<std::streamsize>(d.size() * sizeof(d[0])));
        },
        v.data);
    if (!out) throw IoError("write failed for " + with_ext(stem, ".raw").string());
  }
  std::ofstream side(with_ext(stem, ".json"), std::ios::trunc);
  if (!side) throw IoError("cannot write " + with_ext(stem, ".json").string());
  side << sidecar(v.dims, v.dtype(), v.voxel_size_nm).dump(2) << "\n";
}

VolumeFile load_volume(const fs::path& path) {
  const fs::path stem = volume_stem(path);
  const Header h = parse_sidecar(with_ext(stem, ".json"));
  VolumeFile v;
  v.dims = h.dims;
  v.voxel_size_nm = h.voxel_size;
  const fs::path raw = with_ext(stem, ".raw");
  const std::int64_t n = v.voxels();
  switch (h.dtype) {
    case DType::kF32: {
      std::vector<float> d;
      read_raw(raw, n, h.big_endian, d);
      v.data = std::move(d);
      break;
    }
    case DType::kU8: {
      std::vector<std::uint8_t> d;
      read_raw(raw, n, h.big_endian, d);
      v.data = std::move(d);
      break;
    }
    case DType::kU32: {
      std::vector<std::uint32_t> d;
      read_raw(raw, n, h.big_endian, d);
      v.data = std::move(d);
      break;
    }
  }
  return v;
}

ImageVolume load_image(const fs::path& path) {
  VolumeFile v = load_volume(path);
  ImageVolume img{v.dims, v.voxel_size_nm, {}};
  if (auto* f = std::get_if<std::vector<float>>(&v.data)) {
    img.values = std::move(*f);
  } else if (auto* b = std::get_if<std::vector<std::uint8_t>>(&v.data)) {
    img.values.resize(b->size());
    std::transform(b->begin(), b->end(), img.values.begin(),
                   [](std::uint8_t x) { return static_cast<float>(x) / 255.0f; });
  } else {
    throw ValidationError("image volume " + path.string() + " must be f32 or u8, found u32");
  }
  return img;
}

void save_image(const fs::path& path, const ImageVolume& img) {
  save_volume(path, VolumeFile{img.dims, img.voxel_size_nm, img.values});
}

LabelVolume load_labels(const fs::path& path) {
  VolumeFile v = load_volume(path);
  LabelVolume out(v.dims);
  if (auto* u = std::get_if<std::vector<std::uint32_t>>(&v.data)) {
    out.labels = std::move(*u);
  } else if (auto* b = std::get_if<std::vector<std::uint8_t>>(&v.data)) {
    std::copy(b->begin(), b->end(), out.labels.begin());
  } else {
    throw ValidationError("label volume " + path.string() + " must be u32 or u8, found f32");
  }
  return out;
}

void save_labels(const fs::path& path, const LabelVolume& labels, VoxelSize voxel_size_nm) {
  save_volume(path, VolumeFile{labels.dims, voxel_size_nm, labels.labels});
}

}  // namespace stt::data
