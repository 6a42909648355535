// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/app/config.hpp"

#include <fstream>
#include <set>

namespace stt::app {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::kFloat32 ? "float32" : "float64"; }

Precision parse_precision(const std::string& s) {
  if (s == "float32") return Precision::kFloat32;
  if (s == "float64") return Precision::kFloat64;
  throw ValidationError("unknown precision '" + s + "' (expected float32|float64)");
}

namespace {

// Reads the keys of one JSON object, remembering which were consumed.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError("config: " + where_ + " must be an object");
  }

  template <typename V>
  bool get(const std::string& key, V& out) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception&) {
      throw ValidationError("config: " + path(key) + " has the wrong type (" +
                            j_.at(key).dump() + ")");
    }
    return true;
  }

  template <typename V, typename Parse>
  void get_enum(const std::string& key, V& out, Parse parse) {
    std::string s;
    if (!get(key, s)) return;
    try {
      out = parse(s);
    } catch (const Error& e) {
      throw ValidationError("config: " + path(key) + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError("config: unknown key '" + path(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json dims_json(const std::array<std::int64_t, 3>& d) { return json::array({d[0], d[1], d[2]}); }

void parse_model(const json& j, model::ModelConfig& m) {
  Section s(j, "model");
  s.get("widths", m.widths);
  s.get("sst_encoder", m.sst_encoder);
  s.get("sst_decoder", m.sst_decoder);
  s.get_enum("denoiser", m.denoiser, model::parse_denoiser);
  s.get("denoiser_width", m.denoiser_width);
  s.get("patch", m.patch);
  s.get("semantic_prior", m.semantic_prior);
  s.get("boundary_prior", m.boundary_prior);
  if (const json* sj = s.child("sst")) {
    Section ss(*sj, "model.sst");
    ss.get_enum("fusion", m.sst.fusion, sst::parse_fusion);
    ss.get_enum("topology", m.sst.topology, sst::parse_topology);
    ss.get("d_k", m.sst.d_k);
    ss.get("deform_kernel", m.sst.deform_kernel);
    ss.get("max_spatial_tokens", m.sst.max_spatial_tokens);
    ss.finish();
  }
  s.finish();
}

json model_json(const model::ModelConfig& m) {
  return {{"widths", m.widths},
          {"sst_encoder", m.sst_encoder},
          {"sst_decoder", m.sst_decoder},
          {"denoiser", model::to_string(m.denoiser)},
          {"denoiser_width", m.denoiser_width},
          {"patch", dims_json(m.patch)},
          {"semantic_prior", m.semantic_prior},
          {"boundary_prior", m.boundary_prior},
          {"sst",
           {{"fusion", sst::to_string(m.sst.fusion)},
            {"topology", sst::to_string(m.sst.topology)},
            {"d_k", m.sst.d_k},
            {"deform_kernel", dims_json(m.sst.deform_kernel)},
            {"max_spatial_tokens", m.sst.max_spatial_tokens}}}};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_relative() && !base.empty()) ? base / path : path;
}

}  // namespace

json synth_spec_to_json(const data::SynthSpec& s) {
  return {{"dims", dims_json(s.dims)},
          {"min_instances", s.min_instances},
          {"max_instances", s.max_instances},
          {"axis_t", s.axis_t},
          {"axis_long", s.axis_long},
          {"axis_short", s.axis_short},
          {"max_bend", s.max_bend},
          {"noise_sigma", s.noise_sigma},
          {"touch_probability", s.touch_probability},
          {"distractors", s.distractors},
          {"distractor_count", s.distractor_count},
          {"max_retries", s.max_retries},
          {"min_instance_voxels", s.min_instance_voxels},
          {"background", s.background},
          {"interior", s.interior},
          {"rim", s.rim},
          {"distractor_intensity", s.distractor_intensity}};
}

namespace {

void read_synth_fields(Section& s, data::SynthSpec& spec) {
  s.get("dims", spec.dims);
  s.get("min_instances", spec.min_instances);
  s.get("max_instances", spec.max_instances);
  s.get("axis_t", spec.axis_t);
  s.get("axis_long", spec.axis_long);
  s.get("axis_short", spec.axis_short);
  s.get("max_bend", spec.max_bend);
  s.get("noise_sigma", spec.noise_sigma);
  s.get("touch_probability", spec.touch_probability);
  s.get("distractors", spec.distractors);
  s.get("distractor_count", spec.distractor_count);
  s.get("max_retries", spec.max_retries);
  s.get("min_instance_voxels", spec.min_instance_voxels);
  s.get("background", spec.background);
  s.get("interior", spec.interior);
  s.get("rim", spec.rim);
  s.get("distractor_intensity", spec.distractor_intensity);
}

}  // namespace

void synth_spec_from_json(const json& j, data::SynthSpec& spec, const std::string& where) {
  Section s(j, where);
  read_synth_fields(s, spec);
  s.finish();
}

void ExperimentConfig::validate() const {
  model.validate();
  losses.validate();
  post.validate();
  if (!(optimizer.lr > 0)) throw ValidationError("optimizer.lr must be > 0");
  if (!(optimizer.beta1 >= 0 && optimizer.beta1 < 1) ||
      !(optimizer.beta2 >= 0 && optimizer.beta2 < 1)) {
    throw ValidationError("optimizer.beta1 and optimizer.beta2 must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0)) throw ValidationError("optimizer.eps must be > 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (discriminator_hidden < 1) throw ValidationError("discriminator_hidden must be >= 1");
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every must be >= 0");
  if (!(augment.rebalance >= 0 && augment.rebalance <= 1)) {
    throw ValidationError("augment.rebalance must lie in [0, 1]");
  }
  for (double p : {augment.ops.flip_h, augment.ops.flip_w, augment.ops.rot90, augment.ops.flip_t,
                   augment.ops.intensity, augment.ops.noise}) {
    if (!(p >= 0 && p <= 1)) throw ValidationError("augment probabilities must lie in [0, 1]");
  }
  if (augment.ops.intensity_range < 0 || augment.ops.noise_sigma_max < 0) {
    throw ValidationError("augment.intensity_range and augment.noise_sigma_max must be >= 0");
  }
  if (data.synthetic()) {
    data.synth.validate();
    if (data.volumes < 1) throw ValidationError("data.synthetic.volumes must be >= 1");
    for (int a = 0; a < 3; ++a) {
      if (model.patch[a] > data.synth.dims[a]) {
        throw ValidationError("model.patch exceeds data.synthetic.dims");
      }
    }
  } else if (data.labels.empty()) {
    throw ValidationError("data.labels is required with data.image");
  }
}

json ExperimentConfig::to_json() const {
  json d;
  if (data.synthetic()) {
    json s = synth_spec_to_json(data.synth);
    s["seed"] = data.synth_seed;
    s["volumes"] = data.volumes;
    d["synthetic"] = s;
  } else {
    d = {{"image", data.image.string()}, {"labels", data.labels.string()}};
  }
  const auto& a = augment.ops;
  return {{"model", model_json(model)},
          {"losses", {{"lambda", losses.lambda}, {"lambda1", losses.lambda1}}},
          {"post",
           {{"semantic_threshold", post.semantic_threshold},
            {"boundary_threshold", post.boundary_threshold},
            {"connectivity", post.connectivity},
            {"min_size", post.min_size}}},
          {"optimizer",
           {{"kind", "adam"},
            {"lr", optimizer.lr},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"eps", optimizer.eps}}},
          {"batch_size", batch_size},
          {"iterations", iterations},
          {"seed", seed},
          {"precision", app::to_string(precision)},
          {"discriminator_hidden", discriminator_hidden},
          {"checkpoint_every", checkpoint_every},
          {"output_dir", output_dir.string()},
          {"augment",
           {{"flip_h", a.flip_h},
            {"flip_w", a.flip_w},
            {"rot90", a.rot90},
            {"flip_t", a.flip_t},
            {"intensity", a.intensity},
            {"intensity_range", a.intensity_range},
            {"noise", a.noise},
            {"noise_sigma_max", a.noise_sigma_max},
            {"rebalance", augment.rebalance}}},
          {"data", d}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  Section top(j, "");
  if (const json* m = top.child("model")) parse_model(*m, c.model);
  if (const json* l = top.child("losses")) {
    Section s(*l, "losses");
    s.get("lambda", c.losses.lambda);
    s.get("lambda1", c.losses.lambda1);
    s.finish();
  }
  if (const json* p = top.child("post")) {
    Section s(*p, "post");
    s.get("semantic_threshold", c.post.semantic_threshold);
    s.get("boundary_threshold", c.post.boundary_threshold);
    s.get("connectivity", c.post.connectivity);
    s.get("min_size", c.post.min_size);
    s.finish();
  }
  if (const json* o = top.child("optimizer")) {
    Section s(*o, "optimizer");
    std::string kind = "adam";
    s.get("kind", kind);
    if (kind != "adam") {
      throw ValidationError("config: optimizer.kind '" + kind + "' is not supported (adam)");
    }
    s.get("lr", c.optimizer.lr);
    s.get("beta1", c.optimizer.beta1);
    s.get("beta2", c.optimizer.beta2);
    s.get("eps", c.optimizer.eps);
    s.finish();
  }
  top.get("batch_size", c.batch_size);
  top.get("iterations", c.iterations);
  top.get("seed", c.seed);
  top.get_enum("precision", c.precision, parse_precision);
  top.get("discriminator_hidden", c.discriminator_hidden);
  top.get("checkpoint_every", c.checkpoint_every);
  std::string out;
  if (top.get("output_dir", out)) c.output_dir = resolve(base_dir, out);
  if (const json* a = top.child("augment")) {
    Section s(*a, "augment");
    auto& o = c.augment.ops;
    s.get("flip_h", o.flip_h);
    s.get("flip_w", o.flip_w);
    s.get("rot90", o.rot90);
    s.get("flip_t", o.flip_t);
    s.get("intensity", o.intensity);
    s.get("intensity_range", o.intensity_range);
    s.get("noise", o.noise);
    s.get("noise_sigma_max", o.noise_sigma_max);
    s.get("rebalance", c.augment.rebalance);
    s.finish();
  }
  if (const json* d = top.child("data")) {
    Section s(*d, "data");
    std::string image, labels;
    s.get("image", image);
    s.get("labels", labels);
    const json* synth = s.child("synthetic");
    s.finish();
    if (!image.empty() && synth) {
      throw ValidationError("config: data takes either image/labels or synthetic, not both");
    }
    if (!image.empty()) {
      c.data.image = resolve(base_dir, image);
      if (!labels.empty()) c.data.labels = resolve(base_dir, labels);
    } else if (!labels.empty()) {
      throw ValidationError("config: data.labels given without data.image");
    }
    if (synth) {
      Section ss(*synth, "data.synthetic");
      read_synth_fields(ss, c.data.synth);
      ss.get("seed", c.data.synth_seed);
      ss.get("volumes", c.data.volumes);
      ss.finish();
    }
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return ExperimentConfig::from_json(j, path.parent_path());
}

void save_config(const fs::path& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << cfg.to_json().dump(2) << "\n";
}

}  // namespace stt::app
