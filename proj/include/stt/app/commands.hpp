// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "stt/metrics/metrics.hpp"

// Command bodies behind the `stt` executable. They throw stt::Error
// subclasses; the executable maps ValidationError to exit code 1 and every
// other failure to 2.

namespace stt::app {

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> resume;
  std::optional<std::int64_t> iterations;  // overrides the config
  std::optional<std::filesystem::path> output_dir;
  bool quiet = false;
};

void cmd_train(const TrainArgs& args, std::ostream& out);

void cmd_infer(const std::filesystem::path& ckpt, const std::filesystem::path& in,
               const std::filesystem::path& out_path, std::ostream& out);

/// Uses `<pred>.scores.json` when present, equal scores otherwise.
metrics::MetricReport cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& gt,
                               bool json, std::ostream& out);

/// Writes `<out>-image` (f32) and `<out>-labels` (u32) volumes. Without a
/// spec file the defaults are used.
void cmd_synth(const std::optional<std::filesystem::path>& spec, std::uint64_t seed,
               const std::filesystem::path& out_stem, std::ostream& out);

}  // namespace stt::app
