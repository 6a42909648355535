// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/app/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "stt/app/config.hpp"
#include "stt/app/infer.hpp"
#include "stt/app/trainer.hpp"
#include "stt/data/synthetic.hpp"
#include "stt/data/volume_io.hpp"

namespace stt::app {

namespace fs = std::filesystem;

void cmd_train(const TrainArgs& args, std::ostream& out) {
  ExperimentConfig cfg = load_config(args.config);
  if (args.iterations) cfg.iterations = *args.iterations;
  if (args.output_dir) cfg.output_dir = *args.output_dir;
  cfg.validate();
  TrainOptions opts;
  opts.resume = args.resume;
  const auto start = std::chrono::steady_clock::now();
  if (!args.quiet) {
    opts.on_step = [&](const TrainRecord& r) {
      if (r.iter % 10 != 0 && r.iter != cfg.iterations) return;
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      char line[160];
      std::snprintf(line, sizeof line, "iter %6lld  bce %.5f  gen %.5f  disc %.5f  %.1fs\n",
                    static_cast<long long>(r.iter), r.bce, r.gen_loss, r.disc_loss, secs);
      out << line << std::flush;
    };
  }
  const auto records = train(cfg, opts);
  out << "trained " << records.size() << " iterations; model at "
      << (cfg.output_dir / "model.json").string() << "\n";
}

void cmd_infer(const fs::path& ckpt, const fs::path& in, const fs::path& out_path,
               std::ostream& out) {
  const data::ImageVolume img = data::load_image(in);
  const InferResult r = infer_with_checkpoint(ckpt, img);
  write_inference(out_path, r, img.voxel_size_nm);
  out << r.labels.max_label() << " instances from " << r.tiles << " windows -> "
      << data::volume_stem(out_path).string() << ".json\n";
}

metrics::MetricReport cmd_eval(const fs::path& pred, const fs::path& gt, bool json,
                               std::ostream& out) {
  const LabelVolume p = data::load_labels(pred);
  const LabelVolume g = data::load_labels(gt);
  if (p.dims != g.dims) {
    throw ShapeError("eval: prediction dims (" + std::to_string(p.dims[0]) + ", " +
                     std::to_string(p.dims[1]) + ", " + std::to_string(p.dims[2]) +
                     ") differ from ground truth (" + std::to_string(g.dims[0]) + ", " +
                     std::to_string(g.dims[1]) + ", " + std::to_string(g.dims[2]) + ")");
  }
  std::vector<double> scores = read_scores(pred);
  if (scores.empty()) {
    const LabelVolume compact = post::remove_small_and_compact(p, 0);
    scores.assign(compact.max_label(), 1.0);
  }
  const auto report = metrics::evaluate(p, scores, g);
  if (json) {
    out << report.to_json().dump(2) << "\n";
  } else {
    char line[200];
    std::snprintf(line, sizeof line, "ap75 %.6f\njaccard %.6f\ndsc %.6f\nmatched %zu of %lld gt instances\n",
                  report.ap75, report.jaccard, report.dsc, report.matches.size(),
                  static_cast<long long>(report.iou.cols()));
    out << line;
  }
  return report;
}

void cmd_synth(const std::optional<fs::path>& spec_path, std::uint64_t seed, const fs::path& out_stem,
               std::ostream& out) {
  data::SynthSpec spec;
  if (spec_path) {
    std::ifstream in(*spec_path);
    if (!in) throw IoError("cannot open synth spec " + spec_path->string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("synth spec " + spec_path->string() + " is not valid JSON: " + e.what());
    }
    synth_spec_from_json(j, spec, "spec");
  }
  const auto vol = data::generate_synthetic(spec, seed);
  const fs::path stem = data::volume_stem(out_stem);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  fs::path img = stem, lab = stem;
  img += "-image";
  lab += "-labels";
  data::save_image(img, vol.image);
  data::save_labels(lab, vol.labels, vol.image.voxel_size_nm);
  out << vol.labels.max_label() << " instances -> " << img.string() << ", " << lab.string() << "\n";
}

}  // namespace stt::app
