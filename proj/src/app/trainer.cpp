// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/app/trainer.hpp"

#include <fstream>
#include <sstream>

#include "stt/core/autograd.hpp"
#include "stt/core/ops.hpp"

namespace stt::app {

namespace fs = std::filesystem;
using nlohmann::json;

json TrainRecord::to_json() const {
  return {{"iter", iter},
          {"bce", bce},
          {"gen_loss", gen_loss},
          {"disc_loss", disc_loss},
          {"bce_semantic", bce_semantic},
          {"bce_boundary", bce_boundary}};
}

TrainRecord TrainRecord::from_json(const json& j) {
  TrainRecord r;
  r.iter = j.at("iter").get<std::int64_t>();
  r.bce = j.at("bce").get<double>();
  r.gen_loss = j.at("gen_loss").get<double>();
  r.disc_loss = j.at("disc_loss").get<double>();
  r.bce_semantic = j.value("bce_semantic", 0.0);
  r.bce_boundary = j.value("bce_boundary", 0.0);
  return r;
}

std::vector<TrainingVolume> load_training_data(const DataSource& src) {
  std::vector<TrainingVolume> out;
  if (src.synthetic()) {
    for (std::int64_t v = 0; v < src.volumes; ++v) {
      auto s = data::generate_synthetic(src.synth, src.synth_seed + static_cast<std::uint64_t>(v));
      out.push_back({std::move(s.image), std::move(s.labels)});
    }
    return out;
  }
  TrainingVolume tv{data::load_image(src.image), data::load_labels(src.labels)};
  if (tv.image.dims != tv.labels.dims) {
    throw ShapeError("training image " + src.image.string() + " and labels " +
                     src.labels.string() + " have different dims");
  }
  out.push_back(std::move(tv));
  return out;
}

template <typename T>
Trainer<T>::Trainer(ExperimentConfig cfg) : Trainer(cfg, load_training_data(cfg.data)) {}

template <typename T>
Trainer<T>::Trainer(ExperimentConfig cfg, std::vector<TrainingVolume> volumes)
    : cfg_(std::move(cfg)), volumes_(std::move(volumes)) {
  cfg_.validate();
  if (volumes_.empty()) throw ValidationError("trainer: no training volumes");
  for (const auto& v : volumes_) {
    for (int a = 0; a < 3; ++a) {
      if (v.image.dims[a] < cfg_.model.patch[a]) {
        throw ShapeError("trainer: volume is smaller than model.patch along axis " +
                         std::to_string(a));
      }
    }
  }
  nn::Rng init(cfg_.seed);
  model_ = model::SttUnet<T>(cfg_.model, init);
  disc_ = loss::Discriminator<T>(2, cfg_.discriminator_hidden, init);
  opt_model_ = optim::Adam<T>(model_.parameters(), cfg_.optimizer);
  opt_disc_ = optim::Adam<T>(disc_.parameters(), cfg_.optimizer);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                    0x5eedu};
  data_rng_.seed(seq);
}

template <typename T>
TrainRecord Trainer<T>::step() {
  const auto& patch = cfg_.model.patch;
  const std::int64_t n = cfg_.batch_size;
  const std::int64_t voxels = patch[0] * patch[1] * patch[2];
  std::vector<T> x(static_cast<std::size_t>(n * voxels));
  std::vector<std::vector<std::uint8_t>> sem(static_cast<std::size_t>(n)),
      bnd(static_cast<std::size_t>(n));
  std::uniform_int_distribution<std::size_t> pick(0, volumes_.size() - 1);
  for (std::int64_t b = 0; b < n; ++b) {
    const auto& vol = volumes_[volumes_.size() == 1 ? 0 : pick(data_rng_)];
    auto p = data::sample_patch(vol.image, vol.labels, patch, data_rng_, cfg_.augment.rebalance);
    data::augment(p, data_rng_, cfg_.augment.ops);
    std::copy(p.image.begin(), p.image.end(), x.begin() + b * voxels);
    sem[static_cast<std::size_t>(b)] = loss::semantic_mask(p.labels);
    bnd[static_cast<std::size_t>(b)] = loss::boundary_mask(p.labels);
  }
  const Tensor<T> input({n, 1, patch[0], patch[1], patch[2]}, std::move(x));
  const loss::SegTargets<T> targets{loss::mask_tensor<T>(sem, patch),
                                    loss::mask_tensor<T>(bnd, patch)};

  opt_model_.zero_grad();
  opt_disc_.zero_grad();
  Tape<T> tape;
  auto scope = tape.activate();
  const auto out = model_.forward(input);
  const Tensor<T> bce_s = loss::bce_loss(out.semantic_logits, targets.semantic);
  const Tensor<T> bce_b = loss::bce_loss(out.boundary_logits, targets.boundary);
  Tensor<T> objective = add(bce_s, bce_b);

  TrainRecord rec;
  rec.iter = iteration_ + 1;
  rec.bce_semantic = static_cast<double>(bce_s.item());
  rec.bce_boundary = static_cast<double>(bce_b.item());
  rec.bce = rec.bce_semantic + rec.bce_boundary;
  const bool adversarial = cfg_.losses.lambda > 0;
  if (adversarial) {
    const auto adv = loss::fg_bg_adversarial_loss(input, sigmoid(out.semantic_logits),
                                                  targets.semantic, disc_, cfg_.losses.lambda1);
    rec.gen_loss = static_cast<double>(adv.gen.item());
    rec.disc_loss = static_cast<double>(adv.disc.item());
    objective = add(objective, scale(adv.gen, static_cast<T>(cfg_.losses.lambda)));
    objective = add(objective, adv.disc);
  }
  tape.backward(objective);
  opt_model_.step();
  if (adversarial) opt_disc_.step();
  ++iteration_;
  return rec;
}

namespace {

template <typename T>
void assign_all(const Checkpoint& ck, const nn::ParamList<T>& params) {
  for (const auto& p : params) {
    const CheckpointRecord* r = ck.find(p.name);
    if (!r) throw IoError("checkpoint lacks parameter '" + p.name + "'");
    Tensor<T> t = p.tensor;
    assign_record(*r, t);
  }
}

}  // namespace

template <typename T>
void Trainer<T>::save(const fs::path& stem) const {
  std::vector<CheckpointRecord> records;
  for (const auto& p : model_.parameters()) records.push_back(make_record(p.name, "model", p.tensor));
  for (const auto& p : disc_.parameters()) {
    records.push_back(make_record(p.name, "discriminator", p.tensor));
  }
  for (auto& r : opt_model_.state_records("opt.model")) records.push_back(std::move(r));
  for (auto& r : opt_disc_.state_records("opt.disc")) records.push_back(std::move(r));
  std::ostringstream rng;
  rng << data_rng_;
  const json meta = {{"iteration", iteration_},
                     {"precision", to_string(cfg_.precision)},
                     {"config", cfg_.to_json()},
                     {"data_rng", rng.str()},
                     {"adam_steps", {{"model", opt_model_.steps()}, {"disc", opt_disc_.steps()}}}};
  save_checkpoint(stem, records, std::is_same_v<T, float> ? ValueType::kF32 : ValueType::kF64, meta);
}

template <typename T>
void Trainer<T>::resume(const fs::path& stem) {
  const Checkpoint ck = load_checkpoint(stem);
  const json& meta = ck.manifest.at("metadata");
  if (!meta.contains("iteration") || !meta.contains("data_rng")) {
    throw IoError("checkpoint " + stem.string() + " holds weights only and cannot be resumed");
  }
  if (meta.at("precision").get<std::string>() != to_string(cfg_.precision)) {
    throw ValidationError("checkpoint precision " + meta.at("precision").get<std::string>() +
                          " differs from config precision " + to_string(cfg_.precision));
  }
  if (meta.at("config").at("model") != cfg_.to_json().at("model")) {
    throw ValidationError("checkpoint model config differs from the experiment config");
  }
  assign_all(ck, model_.parameters());
  assign_all(ck, disc_.parameters());
  opt_model_.load_state(ck, "opt.model", meta.at("adam_steps").at("model").get<std::int64_t>());
  opt_disc_.load_state(ck, "opt.disc", meta.at("adam_steps").at("disc").get<std::int64_t>());
  std::istringstream rng(meta.at("data_rng").get<std::string>());
  rng >> data_rng_;
  if (!rng) throw IoError("checkpoint " + stem.string() + " has a malformed rng state");
  iteration_ = meta.at("iteration").get<std::int64_t>();
}

ExperimentConfig checkpoint_config(const Checkpoint& ck) {
  const json& meta = ck.manifest.at("metadata");
  if (!meta.contains("config")) throw IoError("checkpoint carries no experiment config");
  return ExperimentConfig::from_json(meta.at("config"));
}

template <typename T>
model::SttUnet<T> load_model(const Checkpoint& ck, ExperimentConfig* cfg_out) {
  ExperimentConfig cfg = checkpoint_config(ck);
  nn::Rng rng(0);
  model::SttUnet<T> m(cfg.model, rng);
  assign_all(ck, m.parameters());
  if (cfg_out) *cfg_out = std::move(cfg);
  return m;
}

namespace {

// Keeps the log lines up to `iteration` (for resumed runs).
void truncate_log(const fs::path& log, std::int64_t iteration) {
  std::vector<std::string> keep;
  if (std::ifstream in(log); in) {
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      if (json::parse(line).at("iter").get<std::int64_t>() <= iteration) keep.push_back(line);
    }
  }
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

template <typename T>
std::vector<TrainRecord> run(const ExperimentConfig& cfg, const TrainOptions& opts) {
  Trainer<T> tr(cfg);
  if (opts.resume) tr.resume(*opts.resume);
  const std::int64_t until = opts.until < 0 ? cfg.iterations : opts.until;
  const fs::path dir = cfg.output_dir;
  const fs::path log = dir / "train_log.jsonl";
  std::ofstream log_out;
  if (opts.write_files) {
    fs::create_directories(dir);
    save_config(dir / "config.json", cfg);
    truncate_log(log, tr.iteration());
    log_out.open(log, std::ios::app);
    if (!log_out) throw IoError("cannot write " + log.string());
  }
  std::vector<TrainRecord> records;
  while (tr.iteration() < until) {
    const TrainRecord rec = tr.step();
    records.push_back(rec);
    if (opts.write_files) {
      log_out << rec.to_json().dump() << "\n" << std::flush;
      if (cfg.checkpoint_every > 0 && rec.iter % cfg.checkpoint_every == 0) {
        tr.save(dir / ("checkpoint_" + std::to_string(rec.iter)));
      }
    }
    if (opts.on_step) opts.on_step(rec);
  }
  if (opts.write_files) tr.save(dir / "model");
  return records;
}

}  // namespace

std::vector<TrainRecord> train(const ExperimentConfig& cfg, const TrainOptions& opts) {
  return cfg.precision == Precision::kFloat32 ? run<float>(cfg, opts) : run<double>(cfg, opts);
}

template class Trainer<float>;
template class Trainer<double>;
template model::SttUnet<float> load_model<float>(const Checkpoint&, ExperimentConfig*);
template model::SttUnet<double> load_model<double>(const Checkpoint&, ExperimentConfig*);

}  // namespace stt::app
