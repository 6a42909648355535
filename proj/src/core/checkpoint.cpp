// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/core/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace stt {
namespace {

constexpr char kMagic[8] = {'S', 'T', 'T', 'C', 'K', 'P', 'T', '1'};

template <typename U>
void put_le(std::ostream& os, U value) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(U));
  }
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw IoError("checkpoint archive truncated: " + path.string());
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(U));
  }
  U value;
  std::memcpy(&value, bytes, sizeof(U));
  return value;
}

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::int64_t Checkpoint::total_elements(const std::string& group) const {
  std::int64_t n = 0;
  for (const auto& r : records) {
    if (r.group == group) n += static_cast<std::int64_t>(r.values.size());
  }
  return n;
}

std::filesystem::path checkpoint_stem(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".bin") {
    auto stem = path;
    stem.replace_extension();
    return stem;
  }
  return path;
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointRecord>& records, ValueType value_type,
                     const nlohmann::json& metadata) {
  const auto stem = checkpoint_stem(path);
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";

  std::ofstream os(bin_path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + bin_path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));

  nlohmann::json entries = nlohmann::json::array();
  nlohmann::json load_order = nlohmann::json::array();
  nlohmann::json totals = nlohmann::json::object();
  for (const auto& r : records) {
    if (numel(r.shape) != static_cast<std::int64_t>(r.values.size())) {
      throw ShapeError("checkpoint record '" + r.name + "' has shape " + shape_str(r.shape) +
                       " but " + std::to_string(r.values.size()) + " values");
    }
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put_le<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    for (double v : r.values) {
      if (value_type == ValueType::kF32) {
        put_le<float>(os, static_cast<float>(v));
      } else {
        put_le<double>(os, v);
      }
    }
    entries.push_back({{"name", r.name},
                       {"group", r.group},
                       {"shape", r.shape},
                       {"count", r.values.size()}});
    load_order.push_back(r.name);
    totals[r.group] = totals.value(r.group, std::int64_t{0}) +
                      static_cast<std::int64_t>(r.values.size());
  }
  if (!os) throw IoError("write failed: " + bin_path.string());

  nlohmann::json manifest = {
      {"format", "stt-checkpoint"},
      {"version", 1},
      {"dtype", value_type == ValueType::kF32 ? "f32" : "f64"},
      {"byte_order", "little-endian"},
      {"archive", bin_path.filename().string()},
      {"load_order", load_order},
      {"entries", entries},
      {"total_elements", totals},
      {"metadata", metadata.is_null() ? nlohmann::json::object() : metadata},
  };
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw IoError("cannot open " + json_path.string() + " for writing");
  js << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto stem = checkpoint_stem(path);
  auto json_path = stem;
  json_path += ".json";
  std::ifstream js(json_path);
  if (!js) throw IoError("cannot open checkpoint manifest " + json_path.string());
  Checkpoint ckpt;
  try {
    js >> ckpt.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest " + json_path.string() + ": " + e.what());
  }
  const std::string dtype = ckpt.manifest.value("dtype", "");
  if (dtype != "f32" && dtype != "f64") {
    throw IoError("checkpoint manifest has unknown dtype '" + dtype + "'");
  }
  const bool f32 = dtype == "f32";
  const auto bin_path = stem.parent_path() / ckpt.manifest.value("archive", "");
  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint archive " + bin_path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint archive: " + bin_path.string());
  }
  const auto count = get_le<std::uint32_t>(is, bin_path);
  const auto& order = ckpt.manifest.at("load_order");
  const auto& entries = ckpt.manifest.at("entries");
  if (order.size() != count || entries.size() != count) {
    throw IoError("checkpoint manifest lists " + std::to_string(order.size()) +
                  " entries, archive holds " + std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord r;
    const auto len = get_le<std::uint32_t>(is, bin_path);
    r.name.resize(len);
    if (!is.read(r.name.data(), len)) throw IoError("checkpoint archive truncated");
    if (r.name != order[i].get<std::string>()) {
      throw IoError("checkpoint entry " + std::to_string(i) + " is '" + r.name +
                    "', manifest expects '" + order[i].get<std::string>() + "'");
    }
    r.group = entries[i].value("group", "");
    const auto rank = get_le<std::uint32_t>(is, bin_path);
    for (std::uint32_t d = 0; d < rank; ++d) {
      r.shape.push_back(static_cast<std::int64_t>(get_le<std::uint64_t>(is, bin_path)));
    }
    const auto n = static_cast<std::size_t>(numel(r.shape));
    r.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      r.values[j] = f32 ? static_cast<double>(get_le<float>(is, bin_path))
                        : get_le<double>(is, bin_path);
    }
    ckpt.records.push_back(std::move(r));
  }
  return ckpt;
}

template <typename T>
CheckpointRecord make_record(std::string name, std::string group, const Tensor<T>& t) {
  CheckpointRecord r;
  r.name = std::move(name);
  r.group = std::move(group);
  r.shape = t.shape();
  r.values.assign(t.data().begin(), t.data().end());
  return r;
}

template <typename T>
void assign_record(const CheckpointRecord& record, Tensor<T>& t) {
  if (record.shape != t.shape()) {
    throw ShapeError("checkpoint entry '" + record.name + "' has shape " +
                     shape_str(record.shape) + ", parameter expects " + shape_str(t.shape()));
  }
  auto dst = t.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(record.values[i]);
}

template CheckpointRecord make_record(std::string, std::string, const Tensor<float>&);
template CheckpointRecord make_record(std::string, std::string, const Tensor<double>&);
template void assign_record(const CheckpointRecord&, Tensor<float>&);
template void assign_record(const CheckpointRecord&, Tensor<double>&);

}  // namespace stt
