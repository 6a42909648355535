// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "stt/core/tensor.hpp"

// Parameter checkpoints: `<stem>.bin` holds a flat archive of
//   u32 name_len | name bytes | u32 rank | u64 dims[rank] | values
// entries (little-endian, values f32 or f64), `<stem>.json` is the manifest
// listing names in load order plus arbitrary run metadata.

namespace stt {

enum class ValueType { kF32, kF64 };

struct CheckpointRecord {
  std::string name;
  std::string group;  // "model", "discriminator", "optimizer", ...
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::vector<CheckpointRecord> records;
  nlohmann::json manifest;

  /// nullptr if absent.
  const CheckpointRecord* find(const std::string& name) const;
  std::int64_t total_elements(const std::string& group) const;
};

/// Strips a trailing `.json` / `.bin` so either file (or the bare stem) works.
std::filesystem::path checkpoint_stem(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointRecord>& records,
                     ValueType value_type, const nlohmann::json& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
CheckpointRecord make_record(std::string name, std::string group, const Tensor<T>& t);

/// Copies a record's values into `t`, checking the shape.
template <typename T>
void assign_record(const CheckpointRecord& record, Tensor<T>& t);

}  // namespace stt
