// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "stt/app/config.hpp"
#include "stt/core/checkpoint.hpp"
#include "stt/loss/losses.hpp"
#include "stt/model/model.hpp"
#include "stt/optim/adam.hpp"

namespace stt::app {

struct TrainRecord {
  std::int64_t iter = 0;
  double bce = 0.0;  // semantic + boundary
  double bce_semantic = 0.0;
  double bce_boundary = 0.0;
  double gen_loss = 0.0;
  double disc_loss = 0.0;

  nlohmann::json to_json() const;
  static TrainRecord from_json(const nlohmann::json& j);
};

/// Image and labels of one training volume.
struct TrainingVolume {
  data::ImageVolume image;
  LabelVolume labels;
};

/// Synthetic volumes from the spec, or the file pair.
std::vector<TrainingVolume> load_training_data(const DataSource& src);

/// One iteration: a batch of sampled, augmented patches; one forward pass;
/// the segmentation loss plus lambda * generator loss updates the network,
/// the discriminator loss (on the detached prediction) updates the
/// discriminator. Both gradients come from the same backward pass and reach
/// disjoint parameter sets. With lambda = 0 the discriminator is not run.
template <typename T>
class Trainer {
 public:
  explicit Trainer(ExperimentConfig cfg);
  Trainer(ExperimentConfig cfg, std::vector<TrainingVolume> volumes);

  TrainRecord step();
  std::int64_t iteration() const { return iteration_; }

  /// Weights, optimizer moments, data rng and iteration in one checkpoint.
  void save(const std::filesystem::path& stem) const;
  /// Restores a checkpoint written by save() with a compatible config.
  void resume(const std::filesystem::path& stem);

  const model::SttUnet<T>& model() const { return model_; }
  model::SttUnet<T>& model() { return model_; }
  const loss::Discriminator<T>& discriminator() const { return disc_; }
  const ExperimentConfig& config() const { return cfg_; }
  const std::vector<TrainingVolume>& volumes() const { return volumes_; }

 private:
  ExperimentConfig cfg_;
  std::vector<TrainingVolume> volumes_;
  model::SttUnet<T> model_;
  loss::Discriminator<T> disc_;
  optim::Adam<T> opt_model_;
  optim::Adam<T> opt_disc_;
  data::Rng data_rng_;
  std::int64_t iteration_ = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  std::int64_t until = -1;  // stop after this iteration; -1 runs config.iterations
  bool write_files = true;  // log, periodic checkpoints and final model in output_dir
  std::function<void(const TrainRecord&)> on_step;
};

/// Runs training at the configured precision and returns the records of the
/// iterations executed in this call. Files in output_dir:
///   config.json, train_log.jsonl, checkpoint_<iter>.{json,bin}, model.{json,bin}
std::vector<TrainRecord> train(const ExperimentConfig& cfg, const TrainOptions& opts = {});

/// Model weights and config from any checkpoint written by the trainer.
template <typename T>
model::SttUnet<T> load_model(const Checkpoint& ck, ExperimentConfig* cfg_out = nullptr);

/// Config stored in a trainer checkpoint.
ExperimentConfig checkpoint_config(const Checkpoint& ck);

}  // namespace stt::app
