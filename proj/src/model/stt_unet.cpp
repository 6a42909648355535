// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "stt/core/ops.hpp"
#include "stt/model/model.hpp"

namespace stt::model {

void ModelConfig::validate() const {
  for (int l = 0; l < kEncoderLevels; ++l) {
    if (widths[l] <= 0) {
      throw ValidationError("model.widths[" + std::to_string(l) + "] must be > 0");
    }
  }
  if (denoiser == DenoiserMode::kKernelPredict && denoiser_width <= 0) {
    throw ValidationError("model.denoiser_width must be > 0 for the kernel-predict denoiser");
  }
  Dims3 total{1, 1, 1};
  for (int l = 0; l < kEncoderLevels - 1; ++l) {
    for (int a = 0; a < 3; ++a) total[a] *= down_factor(l)[a];
  }
  for (int a = 0; a < 3; ++a) {
    if (patch[a] <= 0 || patch[a] % total[a] != 0) {
      throw ValidationError("model.patch must be positive with T divisible by " +
                            std::to_string(total[0]) + " and H, W by " +
                            std::to_string(total[1]));
    }
  }
  for (double p : {semantic_prior, boundary_prior}) {
    if (!(p > 0 && p < 1)) throw ValidationError("model head priors must lie in (0, 1)");
  }
  sst::SstConfig probe = sst;
  probe.d_model = 1;
  probe.validate();
}

Dims3 ModelConfig::down_factor(int level) {
  return level < 2 ? Dims3{1, 2, 2} : Dims3{2, 2, 2};
}

std::array<Dims3, kEncoderLevels> ModelConfig::level_shapes(Dims3 input) const {
  std::array<Dims3, kEncoderLevels> out;
  out[0] = input;
  for (int l = 1; l < kEncoderLevels; ++l) {
    for (int a = 0; a < 3; ++a) out[l][a] = out[l - 1][a] / down_factor(l - 1)[a];
  }
  return out;
}

sst::SstConfig ModelConfig::sst_at(std::int64_t width) const {
  sst::SstConfig c = sst;
  c.d_model = width;
  return c;
}

template <typename T>
SttUnet<T>::SttUnet(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  const auto& w = cfg.widths;
  if (cfg.denoiser == DenoiserMode::kKernelPredict) {
    denoiser_ = Denoiser<T>(cfg.denoiser_width, rng);
  }
  for (int l = 0; l < kEncoderLevels; ++l) {
    enc_acb_[l] = nn::AcbBlock<T>(l == 0 ? 1 : w[l], w[l], rng);
    if (cfg.sst_encoder[l]) enc_sst_[l] = sst::SstWeights<T>::init(cfg.sst_at(w[l]), rng);
    if (l < kEncoderLevels - 1) {
      const Dims3 f = ModelConfig::down_factor(l);
      down_[l] = nn::Conv3dLayer<T>(w[l], w[l + 1], f, f, {0, 0, 0}, rng);
    }
  }
  for (int l = kDecoderLevels - 1; l >= 0; --l) {
    up_[l] = nn::Conv3dLayer<T>(w[l + 1], w[l], {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, rng);
    dec_acb_[l] = nn::AcbBlock<T>(2 * w[l], w[l], rng);
    if (cfg.sst_decoder[l]) dec_sst_[l] = sst::SstWeights<T>::init(cfg.sst_at(w[l]), rng);
  }
  sem_head_ = nn::Conv3dLayer<T>(w[0], 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, rng);
  bnd_head_ = nn::Conv3dLayer<T>(w[0], 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, rng);
  sem_head_.bias().mutable_data()[0] = static_cast<T>(std::log(cfg.semantic_prior / (1 - cfg.semantic_prior)));
  bnd_head_.bias().mutable_data()[0] = static_cast<T>(std::log(cfg.boundary_prior / (1 - cfg.boundary_prior)));
}

template <typename T>
Tensor<T> SttUnet<T>::apply_sst(const Tensor<T>& x, const sst::SstWeights<T>& w,
                                const sst::SstConfig& cfg) const {
  const std::int64_t n = x.dim(0);
  if (n == 1) return sst::from_tokens(sst::sst_forward(sst::to_tokens(x), w, cfg));
  std::vector<Tensor<T>> parts;
  for (std::int64_t i = 0; i < n; ++i) {
    parts.push_back(
        sst::from_tokens(sst::sst_forward(sst::to_tokens(slice(x, 0, i, 1)), w, cfg)));
  }
  return concat(parts, 0);
}

template <typename T>
Tensor<T> SttUnet<T>::denoise(const Tensor<T>& x) const {
  return cfg_.denoiser == DenoiserMode::kKernelPredict ? denoiser_.forward(x) : x;
}

template <typename T>
std::vector<Tensor<T>> SttUnet<T>::encode(const Tensor<T>& x) const {
  if (x.rank() != 5 || x.dim(1) != 1) {
    throw ShapeError("model expects [N,1,T,H,W], got " + shape_str(x.shape()));
  }
  const Dims3 in{x.dim(2), x.dim(3), x.dim(4)};
  const auto shapes = cfg_.level_shapes(in);
  for (int a = 0; a < 3; ++a) {
    if (shapes[kEncoderLevels - 1][a] * (a == 0 ? 2 : 8) != in[a]) {
      throw ShapeError("model input " + shape_str(x.shape()) +
                       " is not divisible by the downsampling factors (2, 8, 8)");
    }
  }
  std::vector<Tensor<T>> feats;
  Tensor<T> h = denoise(x);
  for (int l = 0; l < kEncoderLevels; ++l) {
    if (l > 0) h = down_[l - 1].forward(h);
    h = enc_acb_[l].forward(h);
    if (cfg_.sst_encoder[l]) h = apply_sst(h, enc_sst_[l], cfg_.sst_at(cfg_.widths[l]));
    feats.push_back(h);
  }
  return feats;
}

template <typename T>
ModelOutput<T> SttUnet<T>::forward(const Tensor<T>& x) const {
  const auto feats = encode(x);
  Tensor<T> h = feats.back();
  for (int l = kDecoderLevels - 1; l >= 0; --l) {
    h = up_[l].forward(nn::upsample_trilinear(h, ModelConfig::down_factor(l)));
    h = dec_acb_[l].forward(concat<T>({h, feats[l]}, 1));
    if (cfg_.sst_decoder[l]) h = apply_sst(h, dec_sst_[l], cfg_.sst_at(cfg_.widths[l]));
  }
  return {sem_head_.forward(h), bnd_head_.forward(h)};
}

template <typename T>
ParamList<T> SttUnet<T>::parameters() const {
  ParamList<T> out;
  if (cfg_.denoiser == DenoiserMode::kKernelPredict) denoiser_.collect("denoiser", out);
  for (int l = 0; l < kEncoderLevels; ++l) {
    const std::string p = "enc" + std::to_string(l);
    enc_acb_[l].collect(p + ".acb", out);
    if (cfg_.sst_encoder[l]) enc_sst_[l].collect(p + ".sst", cfg_.sst_at(cfg_.widths[l]), out);
    if (l < kEncoderLevels - 1) down_[l].collect("down" + std::to_string(l), out);
  }
  for (int l = kDecoderLevels - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    up_[l].collect(p + ".up", out);
    dec_acb_[l].collect(p + ".acb", out);
    if (cfg_.sst_decoder[l]) dec_sst_[l].collect(p + ".sst", cfg_.sst_at(cfg_.widths[l]), out);
  }
  sem_head_.collect("head.semantic", out);
  bnd_head_.collect("head.boundary", out);
  return out;
}

namespace {

std::int64_t conv_count(std::int64_t in, std::int64_t out, Dims3 k) {
  return nn::Conv3dLayer<double>::parameter_count(in, out, k);
}

std::int64_t acb_count(std::int64_t in, std::int64_t out) {
  return conv_count(in, out, {1, 3, 3}) + 2 * conv_count(out, out, {3, 3, 3});
}

}  // namespace

std::vector<std::pair<std::string, std::int64_t>> parameter_breakdown(const ModelConfig& cfg) {
  std::vector<std::pair<std::string, std::int64_t>> out;
  const auto& w = cfg.widths;
  if (cfg.denoiser == DenoiserMode::kKernelPredict) {
    out.emplace_back("denoiser", Denoiser<double>::parameter_count(cfg.denoiser_width));
  }
  for (int l = 0; l < kEncoderLevels; ++l) {
    const std::string p = "enc" + std::to_string(l);
    out.emplace_back(p + ".acb", acb_count(l == 0 ? (w[0] > 0 ? 1 : 0) : w[l], w[l]));
    if (cfg.sst_encoder[l]) {
      out.emplace_back(p + ".sst", sst::SstWeights<double>::parameter_count(cfg.sst_at(w[l])));
    }
    if (l < kEncoderLevels - 1) {
      out.emplace_back("down" + std::to_string(l),
                       conv_count(w[l], w[l + 1], ModelConfig::down_factor(l)));
    }
  }
  for (int l = kDecoderLevels - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    out.emplace_back(p + ".up", conv_count(w[l + 1], w[l], {1, 1, 1}));
    out.emplace_back(p + ".acb", acb_count(2 * w[l], w[l]));
    if (cfg.sst_decoder[l]) {
      out.emplace_back(p + ".sst", sst::SstWeights<double>::parameter_count(cfg.sst_at(w[l])));
    }
  }
  out.emplace_back("head.semantic", conv_count(w[0], 1, {1, 1, 1}));
  out.emplace_back("head.boundary", conv_count(w[0], 1, {1, 1, 1}));
  return out;
}

std::int64_t count_parameters(const ModelConfig& cfg) {
  std::int64_t n = 0;
  for (const auto& [name, c] : parameter_breakdown(cfg)) n += c;
  return n;
}

template class SttUnet<float>;
template class SttUnet<double>;

}  // namespace stt::model
