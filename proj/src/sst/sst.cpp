// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/sst/sst.hpp"

#include <cmath>

#include "stt/core/ops.hpp"

namespace stt::sst {

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kDefConv: return "def-conv";
    case Fusion::kConcat: return "concat";
    case Fusion::kAddition: return "addition";
  }
  return "?";
}

std::string to_string(Topology t) {
  switch (t) {
    case Topology::kSplit: return "split";
    case Topology::kSpatialThenTemporal: return "spatial-then-temporal";
    case Topology::kTemporalThenSpatial: return "temporal-then-spatial";
  }
  return "?";
}

Fusion parse_fusion(const std::string& s) {
  if (s == "def-conv") return Fusion::kDefConv;
  if (s == "concat") return Fusion::kConcat;
  if (s == "addition") return Fusion::kAddition;
  throw ValidationError("fusion must be one of def-conv|concat|addition, got '" + s + "'");
}

Topology parse_topology(const std::string& s) {
  if (s == "split") return Topology::kSplit;
  if (s == "spatial-then-temporal") return Topology::kSpatialThenTemporal;
  if (s == "temporal-then-spatial") return Topology::kTemporalThenSpatial;
  throw ValidationError(
      "topology must be one of split|spatial-then-temporal|temporal-then-spatial, got '" + s +
      "'");
}

void SstConfig::validate() const {
  if (d_model <= 0) throw ValidationError("sst.d_model must be > 0");
  if (d_k < 0) throw ValidationError("sst.d_k must be >= 0 (0 selects d_model)");
  for (auto k : deform_kernel) {
    if (k < 1 || k % 2 == 0) {
      throw ValidationError("sst.deform_kernel extents must be odd and positive");
    }
  }
  if (max_spatial_tokens < 1) throw ValidationError("sst.max_spatial_tokens must be >= 1");
}

namespace {

template <typename T>
Tensor<T> uniform_param(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v), true);
}

bool cascaded(const SstConfig& cfg) { return cfg.topology != Topology::kSplit; }

// [T, H, W, C] -> [T, H*W, C]
template <typename T>
Tensor<T> flat_slices(const Tensor<T>& x) {
  if (x.rank() != 4) {
    throw ShapeError("attention expects [T,H,W,C], got " + shape_str(x.shape()));
  }
  return reshape(x, {x.dim(0), x.dim(1) * x.dim(2), x.dim(3)});
}

template <typename T>
void check_projection(const Tensor<T>& x, const Tensor<T>& w, const char* name) {
  if (w.rank() != 2 || w.dim(0) != x.dim(3)) {
    throw ShapeError(std::string("attention projection ") + name + " " + shape_str(w.shape()) +
                     " does not match input " + shape_str(x.shape()));
  }
}

// softmax(q k^T / sqrt(dk)) over the last axis, q/k [B, N, dk].
template <typename T>
Tensor<T> scores(const Tensor<T>& q, const Tensor<T>& k) {
  const T inv = T(1) / std::sqrt(static_cast<T>(q.dim(-1)));
  return softmax(scale(matmul(q, transpose(k)), inv), 2);
}

}  // namespace

template <typename T>
SstWeights<T> SstWeights<T>::init(const SstConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::int64_t c = cfg.d_model, dk = cfg.dk();
  const std::int64_t s_in = cfg.topology == Topology::kTemporalThenSpatial ? dk : c;
  const std::int64_t t_in = cfg.topology == Topology::kSpatialThenTemporal ? dk : c;
  SstWeights w;
  w.norm = nn::LayerNorm<T>(c);
  w.wq_s = nn::glorot<T>(s_in, dk, rng);
  w.wk_s = nn::glorot<T>(s_in, dk, rng);
  w.wv_s = nn::glorot<T>(s_in, dk, rng);
  w.wq_t = nn::glorot<T>(t_in, dk, rng);
  w.wk_t = nn::glorot<T>(t_in, dk, rng);
  w.wv_t = nn::glorot<T>(t_in, dk, rng);
  if (!cascaded(cfg)) {
    if (cfg.fusion == Fusion::kDefConv) {
      w.offset = nn::Conv3dLayer<T>(dk, 3 * cfg.taps(), {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, rng);
      for (auto& v : w.offset.weight().mutable_data()) v = T(0);
      const auto& k = cfg.deform_kernel;
      w.deform_weight = uniform_param<T>({dk, dk, k[0], k[1], k[2]},
                                         std::sqrt(6.0 / static_cast<double>(dk * cfg.taps())),
                                         rng);
    } else if (cfg.fusion == Fusion::kConcat) {
      w.concat_weight = nn::glorot<T>(2 * dk, dk, rng);
      w.concat_bias = Tensor<T>::zeros({dk}, true);
    }
  }
  w.out_weight = nn::glorot<T>(dk, c, rng);
  w.out_bias = Tensor<T>::zeros({c}, true);
  return w;
}

template <typename T>
void SstWeights<T>::collect(const std::string& prefix, const SstConfig& cfg,
                            ParamList<T>& out) const {
  norm.collect(prefix + ".norm", out);
  out.push_back({prefix + ".wq_s", wq_s});
  out.push_back({prefix + ".wk_s", wk_s});
  out.push_back({prefix + ".wv_s", wv_s});
  out.push_back({prefix + ".wq_t", wq_t});
  out.push_back({prefix + ".wk_t", wk_t});
  out.push_back({prefix + ".wv_t", wv_t});
  if (!cascaded(cfg)) {
    if (cfg.fusion == Fusion::kDefConv) {
      offset.collect(prefix + ".offset", out);
      out.push_back({prefix + ".deform_weight", deform_weight});
    } else if (cfg.fusion == Fusion::kConcat) {
      out.push_back({prefix + ".concat_weight", concat_weight});
      out.push_back({prefix + ".concat_bias", concat_bias});
    }
  }
  out.push_back({prefix + ".out_weight", out_weight});
  out.push_back({prefix + ".out_bias", out_bias});
}

template <typename T>
std::int64_t SstWeights<T>::parameter_count(const SstConfig& cfg) {
  const std::int64_t c = cfg.d_model;
  if (c <= 0) return 0;
  const std::int64_t dk = cfg.dk();
  std::int64_t n = 2 * c;                              // layer norm
  n += 3 * c * dk + 3 * (cascaded(cfg) ? dk : c) * dk;  // projections
  if (!cascaded(cfg)) {
    if (cfg.fusion == Fusion::kDefConv) {
      n += nn::Conv3dLayer<T>::parameter_count(dk, 3 * cfg.taps(), {1, 1, 1});
      n += dk * dk * cfg.taps();
    } else if (cfg.fusion == Fusion::kConcat) {
      n += 2 * dk * dk + dk;
    }
  }
  n += dk * c + c;
  return n;
}

template <typename T>
Tensor<T> spatial_attention_weights(const Tensor<T>& x, const Tensor<T>& wq,
                                    const Tensor<T>& wk) {
  const Tensor<T> xf = flat_slices(x);
  check_projection(x, wq, "W_Q");
  check_projection(x, wk, "W_K");
  return scores(matmul(xf, wq), matmul(xf, wk));
}

template <typename T>
Tensor<T> temporal_attention_weights(const Tensor<T>& x, const Tensor<T>& wq,
                                     const Tensor<T>& wk) {
  const Tensor<T> xp = permute(flat_slices(x), {1, 0, 2});
  check_projection(x, wq, "W_Q");
  check_projection(x, wk, "W_K");
  return scores(matmul(xp, wq), matmul(xp, wk));
}

template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk,
                            const Tensor<T>& wv, std::int64_t max_tokens) {
  const Tensor<T> xf = flat_slices(x);
  if (xf.dim(1) > max_tokens) {
    throw ValidationError("spatial attention over " + std::to_string(xf.dim(1)) +
                          " tokens per slice exceeds the limit of " +
                          std::to_string(max_tokens) + "; disable SST at this level");
  }
  check_projection(x, wq, "W_Q");
  check_projection(x, wk, "W_K");
  check_projection(x, wv, "W_V");
  const Tensor<T> a = scores(matmul(xf, wq), matmul(xf, wk));
  const Tensor<T> out = matmul(a, matmul(xf, wv));
  return reshape(out, {x.dim(0), x.dim(1), x.dim(2), wv.dim(1)});
}

template <typename T>
Tensor<T> temporal_attention(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk,
                             const Tensor<T>& wv) {
  check_projection(x, wq, "W_Q");
  check_projection(x, wk, "W_K");
  check_projection(x, wv, "W_V");
  // [H*W, T, C]
  const Tensor<T> xp = permute(flat_slices(x), {1, 0, 2});
  const Tensor<T> a = scores(matmul(xp, wq), matmul(xp, wk));
  const Tensor<T> out = permute(matmul(a, matmul(xp, wv)), {1, 0, 2});
  return reshape(out, {x.dim(0), x.dim(1), x.dim(2), wv.dim(1)});
}

template <typename T>
Tensor<T> deformable_fuse(const AttentionMaps<T>& maps, const nn::Conv3dLayer<T>& offset,
                          const Tensor<T>& weight) {
  const Tensor<T>& xs = maps.spatial;
  const Tensor<T>& xt = maps.temporal;
  if (xs.rank() != 4 || xs.shape() != xt.shape()) {
    throw ShapeError("deformable_fuse: attention maps disagree, " + shape_str(xs.shape()) +
                     " vs " + shape_str(xt.shape()));
  }
  const std::int64_t nt = xs.dim(0), nh = xs.dim(1), nw = xs.dim(2), dk = xs.dim(3);
  if (weight.rank() != 5 || weight.dim(1) != dk) {
    throw ShapeError("deformable_fuse: kernel " + shape_str(weight.shape()) +
                     " does not match map width " + std::to_string(dk));
  }
  const std::int64_t kt = weight.dim(2), kh = weight.dim(3), kw = weight.dim(4);
  const std::int64_t taps = kt * kh * kw;
  if (kt % 2 == 0 || kh % 2 == 0 || kw % 2 == 0) {
    throw ShapeError("deformable_fuse: kernel extents must be odd, got " +
                     shape_str(weight.shape()));
  }
  if (offset.out_channels() != 3 * taps || offset.in_channels() != dk) {
    throw ShapeError("deformable_fuse: offset predictor must map " + std::to_string(dk) +
                     " -> " + std::to_string(3 * taps) + " channels");
  }
  const std::int64_t positions = nt * nh * nw;
  const std::int64_t samples = positions * taps;

  const Tensor<T> xt5 = reshape(permute(xt, {3, 0, 1, 2}), {1, dk, nt, nh, nw});
  // [1, 3K, T, H, W] -> [P*K, 3] with (dt, dh, dw) per tap
  Tensor<T> off = offset.forward(xt5);
  off = reshape(permute(reshape(off, {taps, 3, positions}), {2, 0, 1}), {samples, 3});
  if (kt == 1) {
    std::vector<T> mask(static_cast<std::size_t>(samples * 3), T(1));
    for (std::int64_t i = 0; i < samples; ++i) mask[3 * i] = T(0);
    off = mul(off, Tensor<T>({samples, 3}, std::move(mask)));
  }
  std::vector<T> base(static_cast<std::size_t>(samples * 3));
  {
    std::size_t j = 0;
    for (std::int64_t t = 0; t < nt; ++t)
      for (std::int64_t h = 0; h < nh; ++h)
        for (std::int64_t w = 0; w < nw; ++w)
          for (std::int64_t a = 0; a < kt; ++a)
            for (std::int64_t b = 0; b < kh; ++b)
              for (std::int64_t c = 0; c < kw; ++c) {
                base[j++] = static_cast<T>(t + a - kt / 2);
                base[j++] = static_cast<T>(h + b - kh / 2);
                base[j++] = static_cast<T>(w + c - kw / 2);
              }
  }
  const Tensor<T> coords = add(Tensor<T>({samples, 3}, std::move(base)), off);
  const Tensor<T> xs_c = permute(xs, {3, 0, 1, 2});
  Tensor<T> sampled = nn::trilinear_sample(xs_c, coords);  // [dk, P*K]
  sampled = reshape(permute(reshape(sampled, {dk, positions, taps}), {1, 0, 2}),
                    {positions, dk * taps});
  const std::int64_t c_out = weight.dim(0);
  const Tensor<T> wmat = transpose(reshape(weight, {c_out, dk * taps}));
  return reshape(matmul(sampled, wmat), {nt, nh, nw, c_out});
}

template <typename T>
AttentionMaps<T> attention_maps(const Tensor<T>& normalized, const SstWeights<T>& w,
                                const SstConfig& cfg) {
  AttentionMaps<T> maps;
  switch (cfg.topology) {
    case Topology::kSplit:
      maps.spatial =
          spatial_attention(normalized, w.wq_s, w.wk_s, w.wv_s, cfg.max_spatial_tokens);
      maps.temporal = temporal_attention(normalized, w.wq_t, w.wk_t, w.wv_t);
      break;
    case Topology::kSpatialThenTemporal:
      maps.spatial =
          spatial_attention(normalized, w.wq_s, w.wk_s, w.wv_s, cfg.max_spatial_tokens);
      maps.temporal = temporal_attention(maps.spatial, w.wq_t, w.wk_t, w.wv_t);
      break;
    case Topology::kTemporalThenSpatial:
      maps.temporal = temporal_attention(normalized, w.wq_t, w.wk_t, w.wv_t);
      maps.spatial =
          spatial_attention(maps.temporal, w.wq_s, w.wk_s, w.wv_s, cfg.max_spatial_tokens);
      break;
  }
  return maps;
}

template <typename T>
Tensor<T> sst_forward(const Tensor<T>& x, const SstWeights<T>& w, const SstConfig& cfg) {
  if (x.rank() != 4 || x.dim(3) != cfg.d_model) {
    throw ShapeError("sst_forward expects [T,H,W," + std::to_string(cfg.d_model) + "], got " +
                     shape_str(x.shape()));
  }
  const Tensor<T> xn = w.norm.forward(x);
  const AttentionMaps<T> maps = attention_maps(xn, w, cfg);
  Tensor<T> fused;
  switch (cfg.topology) {
    case Topology::kSpatialThenTemporal: fused = maps.temporal; break;
    case Topology::kTemporalThenSpatial: fused = maps.spatial; break;
    case Topology::kSplit:
      switch (cfg.fusion) {
        case Fusion::kDefConv: fused = deformable_fuse(maps, w.offset, w.deform_weight); break;
        case Fusion::kConcat:
          fused = add_bias(matmul(concat<T>({maps.spatial, maps.temporal}, 3), w.concat_weight),
                           w.concat_bias);
          break;
        case Fusion::kAddition: fused = add(maps.spatial, maps.temporal); break;
      }
      break;
  }
  return add(x, add_bias(matmul(fused, w.out_weight), w.out_bias));
}

template <typename T>
Tensor<T> to_tokens(const Tensor<T>& x) {
  if (x.rank() != 5 || x.dim(0) != 1) {
    throw ShapeError("to_tokens expects [1,C,T,H,W], got " + shape_str(x.shape()));
  }
  return permute(reshape(x, {x.dim(1), x.dim(2), x.dim(3), x.dim(4)}), {1, 2, 3, 0});
}

template <typename T>
Tensor<T> from_tokens(const Tensor<T>& x) {
  if (x.rank() != 4) {
    throw ShapeError("from_tokens expects [T,H,W,C], got " + shape_str(x.shape()));
  }
  return reshape(permute(x, {3, 0, 1, 2}), {1, x.dim(3), x.dim(0), x.dim(1), x.dim(2)});
}

#define STT_INSTANTIATE(T)                                                                   \
  template struct SstWeights<T>;                                                             \
  template Tensor<T> spatial_attention_weights(const Tensor<T>&, const Tensor<T>&,           \
                                               const Tensor<T>&);                            \
  template Tensor<T> temporal_attention_weights(const Tensor<T>&, const Tensor<T>&,          \
                                                const Tensor<T>&);                           \
  template Tensor<T> spatial_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                       const Tensor<T>&, std::int64_t);                      \
  template Tensor<T> temporal_attention(const Tensor<T>&, const Tensor<T>&,                  \
                                        const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> deformable_fuse(const AttentionMaps<T>&, const nn::Conv3dLayer<T>&,     \
                                     const Tensor<T>&);                                      \
  template AttentionMaps<T> attention_maps(const Tensor<T>&, const SstWeights<T>&,           \
                                           const SstConfig&);                                \
  template Tensor<T> sst_forward(const Tensor<T>&, const SstWeights<T>&, const SstConfig&);  \
  template Tensor<T> to_tokens(const Tensor<T>&);                                            \
  template Tensor<T> from_tokens(const Tensor<T>&);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

#undef STT_INSTANTIATE

}  // namespace stt::sst
