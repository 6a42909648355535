// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "selftest.hpp"
#include "stt/app/commands.hpp"
#include "stt/core/error.hpp"
#include "stt/simd/kernels.hpp"

namespace {

int run_selftest() {
  bool all = true;
  stt::oracle::run_selftest([&](const stt::oracle::CheckResult& r) {
    all = all && r.pass;
    std::printf("[%s] %-22s %6.1fs  %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
  });
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric instance segmentation with split spatio-temporal attention"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "Kernel set: auto, scalar or avx2")->default_val("auto");

  stt::app::TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train from an experiment config");
  c_train->add_option("--config", train.config, "Experiment JSON")->required();
  c_train->add_option("--resume", train.resume, "Checkpoint to continue from");
  c_train->add_option("--iterations", train.iterations, "Override the iteration count");
  c_train->add_option("--out", train.output_dir, "Override the output directory");
  c_train->add_flag("--quiet", train.quiet, "No progress lines");

  std::filesystem::path ckpt, in, out;
  auto* c_infer = app.add_subcommand("infer", "Segment a volume with a trained checkpoint");
  c_infer->add_option("--ckpt", ckpt, "Checkpoint (stem, .json or .bin)")->required();
  c_infer->add_option("--in", in, "Image volume")->required();
  c_infer->add_option("--out", out, "Output label volume stem")->required();

  std::filesystem::path pred, gt;
  bool json = false;
  auto* c_eval = app.add_subcommand("eval", "Score a label volume against ground truth");
  c_eval->add_option("--pred", pred, "Predicted label volume")->required();
  c_eval->add_option("--gt", gt, "Ground-truth label volume")->required();
  c_eval->add_flag("--json", json, "Print the full report as JSON");

  std::optional<std::filesystem::path> spec;
  std::uint64_t seed = 0;
  std::filesystem::path synth_out;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic volume and its labels");
  c_synth->add_option("--spec", spec, "Synthetic spec JSON (defaults when omitted)");
  c_synth->add_option("--seed", seed, "Generator seed");
  c_synth->add_option("--out", synth_out, "Output stem")->required();

  auto* c_selftest = app.add_subcommand("selftest", "Run the oracle property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (isa == "scalar") {
      stt::simd::set_active_isa(stt::simd::Isa::kScalar);
    } else if (isa == "avx2") {
      if (stt::simd::detected_isa() != stt::simd::Isa::kAvx2) {
        throw stt::ValidationError("--isa avx2 requested but the CPU lacks AVX2/FMA");
      }
      stt::simd::set_active_isa(stt::simd::Isa::kAvx2);
    } else if (isa != "auto") {
      throw stt::ValidationError("--isa must be auto, scalar or avx2");
    }
    if (c_train->parsed()) stt::app::cmd_train(train, std::cout);
    if (c_infer->parsed()) stt::app::cmd_infer(ckpt, in, out, std::cout);
    if (c_eval->parsed()) stt::app::cmd_eval(pred, gt, json, std::cout);
    if (c_synth->parsed()) stt::app::cmd_synth(spec, seed, synth_out, std::cout);
    if (c_selftest->parsed()) return run_selftest();
  } catch (const stt::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
