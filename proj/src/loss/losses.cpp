// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/loss/losses.hpp"

#include <algorithm>
#include <cmath>

#include "stt/core/error.hpp"
#include "stt/core/ops.hpp"

namespace stt::loss {

void LossWeights::validate() const {
  if (!(lambda >= 0) || !(lambda1 >= 0)) {
    throw ValidationError("loss weights must be >= 0, got lambda=" + std::to_string(lambda) +
                          " lambda1=" + std::to_string(lambda1));
  }
}

template <typename T>
Discriminator<T>::Discriminator(std::int64_t in_channels, std::int64_t hidden, nn::Rng& rng)
    : conv1_(in_channels, hidden, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}, rng),
      conv2_(hidden, 1, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}, rng) {}

template <typename T>
Tensor<T> Discriminator<T>::logits(const Tensor<T>& f, bool frozen) const {
  if (f.rank() != 5 || f.dim(1) != in_channels()) {
    throw ShapeError("discriminator expects [N," + std::to_string(in_channels()) +
                     ",T,H,W], got " + shape_str(f.shape()));
  }
  auto conv = [frozen](const nn::Conv3dLayer<T>& c, const Tensor<T>& x) {
    if (!frozen) return c.forward(x);
    return nn::conv3d(x, c.weight().detach(), c.bias().detach(), c.stride(), c.padding());
  };
  const Tensor<T> h = leaky_relu(conv(conv1_, f), static_cast<T>(kSlope));
  const Tensor<T> z = conv(conv2_, h);  // [N, 1, t, h, w]
  return mean_axis(reshape(z, {f.dim(0), z.numel() / f.dim(0)}), 1);
}

template <typename T>
Tensor<T> Discriminator<T>::probability(const Tensor<T>& f) const {
  return sigmoid(logits(f));
}

template <typename T>
void Discriminator<T>::collect(const std::string& prefix, nn::ParamList<T>& out) const {
  conv1_.collect(prefix + ".conv1", out);
  conv2_.collect(prefix + ".conv2", out);
}

template <typename T>
nn::ParamList<T> Discriminator<T>::parameters() const {
  nn::ParamList<T> out;
  collect("disc", out);
  return out;
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& target) {
  if (logits.shape() != target.shape()) {
    throw ShapeError("bce_loss: logits " + shape_str(logits.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  return bce_with_logits(logits, target);
}

namespace {

template <typename T>
void check_mask(const Tensor<T>& m, const Tensor<T>& image, const char* name) {
  if (m.shape() != image.shape() || image.rank() != 5 || image.dim(1) != 1) {
    throw ShapeError(std::string("adversarial loss: ") + name + " " + shape_str(m.shape()) +
                     " must match image [N,1,T,H,W] " + shape_str(image.shape()));
  }
  for (const T v : m.data()) {
    if (!(v >= T(0) && v <= T(1))) {
      throw ValidationError(std::string("adversarial loss: ") + name +
                            " values must lie in [0, 1], found " + std::to_string(v));
    }
  }
}

}  // namespace

template <typename T>
AdversarialLoss<T> fg_bg_adversarial_loss(const Tensor<T>& image, const Tensor<T>& m_pred,
                                          const Tensor<T>& m_gt, const Discriminator<T>& d,
                                          double lambda1) {
  check_mask(m_pred, image, "M_pred");
  check_mask(m_gt, image, "M_gt");
  const Tensor<T> img = image.detach();
  const Tensor<T> f_gt = concat<T>({img, m_gt.detach()}, 1);
  const Tensor<T> f_pr = concat<T>({img, m_pred}, 1);
  const Tensor<T> f_pr_fixed = concat<T>({img, m_pred.detach()}, 1);

  AdversarialLoss<T> out;
  // discriminator: trainable weights, constant masks
  const Tensor<T> z_gt = d.logits(f_gt);
  const Tensor<T> z_pr = d.logits(f_pr_fixed);
  out.disc = scale(add(mean(log_sigmoid(z_gt)), mean(log_sigmoid(scale(z_pr, T(-1))))), T(-1));

  // generator: frozen weights, gradient only through m_pred
  const Tensor<T> zf_gt = d.logits(f_gt, true);
  const Tensor<T> zf_pr = d.logits(f_pr, true);
  out.matching = mean(abs(sub(sigmoid(zf_gt), sigmoid(zf_pr))));
  out.gen = add(scale(mean(log_sigmoid(zf_pr)), T(-1)), scale(out.matching, static_cast<T>(lambda1)));
  return out;
}

template <typename T>
Tensor<T> total_loss(const model::ModelOutput<T>& out, const SegTargets<T>& targets,
                     const Tensor<T>& gen_loss, const LossWeights& weights) {
  Tensor<T> l = add(bce_loss(out.semantic_logits, targets.semantic),
                    bce_loss(out.boundary_logits, targets.boundary));
  if (gen_loss.defined() && weights.lambda != 0) {
    l = add(l, scale(gen_loss, static_cast<T>(weights.lambda)));
  }
  return l;
}

std::vector<std::uint8_t> semantic_mask(const LabelVolume& labels) {
  std::vector<std::uint8_t> m(labels.labels.size());
  std::transform(labels.labels.begin(), labels.labels.end(), m.begin(),
                 [](std::uint32_t v) { return static_cast<std::uint8_t>(v != 0); });
  return m;
}

std::vector<std::uint8_t> boundary_mask(const LabelVolume& labels) {
  const auto [nt, nh, nw] = labels.dims;
  std::vector<std::uint8_t> m(labels.labels.size(), 0);
  for (std::int64_t t = 0; t < nt; ++t) {
    for (std::int64_t h = 0; h < nh; ++h) {
      for (std::int64_t w = 0; w < nw; ++w) {
        m[static_cast<std::size_t>(labels.index(t, h, w))] = is_in_plane_edge(labels, t, h, w);
      }
    }
  }
  return m;
}

std::vector<std::uint8_t> boundary_region(const LabelVolume& labels, std::int64_t radius) {
  const auto [nt, nh, nw] = labels.dims;
  // voxels with any in-plane 4-neighbour of a different label, either side
  std::vector<std::uint8_t> change(labels.labels.size(), 0);
  for (std::int64_t t = 0; t < nt; ++t) {
    for (std::int64_t h = 0; h < nh; ++h) {
      for (std::int64_t w = 0; w < nw; ++w) {
        const std::uint32_t v = labels.at(t, h, w);
        change[static_cast<std::size_t>(labels.index(t, h, w))] =
            (h > 0 && labels.at(t, h - 1, w) != v) || (h + 1 < nh && labels.at(t, h + 1, w) != v) ||
            (w > 0 && labels.at(t, h, w - 1) != v) || (w + 1 < nw && labels.at(t, h, w + 1) != v);
      }
    }
  }
  std::vector<std::uint8_t> out(change.size(), 0);
  for (std::int64_t t = 0; t < nt; ++t) {
    for (std::int64_t h = 0; h < nh; ++h) {
      for (std::int64_t w = 0; w < nw; ++w) {
        if (!change[static_cast<std::size_t>(labels.index(t, h, w))]) continue;
        for (std::int64_t y = std::max<std::int64_t>(0, h - radius);
             y <= std::min(nh - 1, h + radius); ++y) {
          for (std::int64_t x = std::max<std::int64_t>(0, w - radius);
               x <= std::min(nw - 1, w + radius); ++x) {
            out[static_cast<std::size_t>(labels.index(t, y, x))] = 1;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> mask_tensor(const std::vector<std::vector<std::uint8_t>>& masks, Extents3 dims) {
  const std::int64_t vol = dims[0] * dims[1] * dims[2];
  std::vector<T> v;
  v.reserve(static_cast<std::size_t>(vol) * masks.size());
  for (const auto& m : masks) {
    if (static_cast<std::int64_t>(m.size()) != vol) {
      throw ShapeError("mask_tensor: mask of " + std::to_string(m.size()) +
                       " voxels does not match extents");
    }
    for (const auto b : m) v.push_back(b ? T(1) : T(0));
  }
  return Tensor<T>({static_cast<std::int64_t>(masks.size()), 1, dims[0], dims[1], dims[2]},
                   std::move(v));
}

double masked_bce(std::span<const double> logits, std::span<const std::uint8_t> target,
                  std::span<const std::uint8_t> region) {
  if (logits.size() != target.size() || logits.size() != region.size()) {
    throw ShapeError("masked_bce: size mismatch");
  }
  double acc = 0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!region[i]) continue;
    const double z = logits[i];
    acc += std::max(z, 0.0) - z * target[i] + std::log1p(std::exp(-std::abs(z)));
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

#define STT_INSTANTIATE(T)                                                                  \
  template class Discriminator<T>;                                                          \
  template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&);                          \
  template AdversarialLoss<T> fg_bg_adversarial_loss(const Tensor<T>&, const Tensor<T>&,    \
                                                     const Tensor<T>&, const Discriminator<T>&, \
                                                     double);                               \
  template Tensor<T> total_loss(const model::ModelOutput<T>&, const SegTargets<T>&,         \
                                const Tensor<T>&, const LossWeights&);                      \
  template Tensor<T> mask_tensor<T>(const std::vector<std::vector<std::uint8_t>>&, Extents3);

STT_INSTANTIATE(float)
STT_INSTANTIATE(double)

}  // namespace stt::loss
