// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stt/core/checkpoint.hpp"
#include "stt/nn/layers.hpp"

namespace stt::optim {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters without a gradient in a step are
/// left untouched (their moments do not decay).
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(nn::ParamList<T> params, AdamConfig cfg);

  void step();
  /// Clears the gradient buffers of all parameters.
  void zero_grad();

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  /// Moments as checkpoint records (`<prefix>.m.<param>`, `<prefix>.v.<param>`).
  std::vector<CheckpointRecord> state_records(const std::string& prefix) const;
  /// Restores moments and the step count (read from `steps`).
  void load_state(const Checkpoint& ck, const std::string& prefix, std::int64_t steps);

 private:
  nn::ParamList<T> params_;
  std::vector<std::vector<T>> m_, v_;
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
};

}  // namespace stt::optim
