// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "stt/data/patches.hpp"
#include "stt/data/synthetic.hpp"
#include "stt/loss/losses.hpp"
#include "stt/model/model.hpp"
#include "stt/optim/adam.hpp"
#include "stt/post/instances.hpp"

// Experiment file (JSON). Every section and key is optional; unknown keys
// are rejected.
//
// {
//   "model": {"widths": [16, 32, 64, 96], "sst_encoder": [false, true, true, true],
//             "sst_decoder": [false, true, true], "denoiser": "kernel-predict",
//             "denoiser_width": 8, "patch": [8, 64, 64],
//             "semantic_prior": 0.1, "boundary_prior": 0.05,
//             "sst": {"fusion": "def-conv", "topology": "split", "d_k": 0,
//                     "deform_kernel": [1, 3, 3], "max_spatial_tokens": 4096}},
//   "losses": {"lambda": 0.5, "lambda1": 0.1},
//   "post": {"semantic_threshold": 0.8, "boundary_threshold": 0.5,
//            "connectivity": 26, "min_size": 64},
//   "optimizer": {"kind": "adam", "lr": 1e-4, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
//   "batch_size": 2, "iterations": 200000, "seed": 0, "precision": "float32",
//   "discriminator_hidden": 16, "checkpoint_every": 1000, "output_dir": "run",
//   "augment": {"flip_h": 0.5, ..., "rebalance": 0.9},
//   "data": {"image": "vol", "labels": "lab"}
//        or {"synthetic": {"dims": [8, 64, 64], ..., "seed": 0, "volumes": 1}}
// }
//
// Relative paths resolve against the directory of the experiment file.

namespace stt::app {

enum class Precision { kFloat32, kFloat64 };

std::string to_string(Precision p);
/// "float32" | "float64"
Precision parse_precision(const std::string& s);

struct DataSource {
  // file-backed volume pair, used when `image` is set
  std::filesystem::path image;
  std::filesystem::path labels;
  // otherwise `volumes` synthetic volumes drawn with seeds seed, seed+1, ...
  data::SynthSpec synth;
  std::uint64_t synth_seed = 0;
  std::int64_t volumes = 1;

  bool synthetic() const { return image.empty(); }
};

struct AugmentSettings {
  data::AugmentConfig ops;
  double rebalance = 0.9;
};

struct ExperimentConfig {
  model::ModelConfig model;
  loss::LossWeights losses;
  post::PostConfig post;
  optim::AdamConfig optimizer;
  std::int64_t batch_size = 2;
  std::int64_t iterations = 200000;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat32;
  std::int64_t discriminator_hidden = 16;
  std::int64_t checkpoint_every = 1000;  // 0 disables periodic checkpoints
  std::filesystem::path output_dir = "run";
  AugmentSettings augment;
  DataSource data;

  /// Field-level ValidationError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Throws ValidationError on unknown keys, wrong types or invalid values.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
};

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

nlohmann::json synth_spec_to_json(const data::SynthSpec& s);
/// Fills fields present in `j` (unknown keys rejected); `where` prefixes errors.
void synth_spec_from_json(const nlohmann::json& j, data::SynthSpec& s,
                          const std::string& where = "synthetic");

}  // namespace stt::app
