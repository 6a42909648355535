// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/nn/layers.hpp"

#include <cmath>
#include <numeric>

#include "stt/core/ops.hpp"

namespace stt::nn {

template <typename T>
Conv3dLayer<T>::Conv3dLayer(std::int64_t in_channels, std::int64_t out_channels,
                            Dims3 kernel, Dims3 stride, Dims3 padding, Rng& rng)
    : stride_(stride), padding_(padding) {
  const std::int64_t fan_in = in_channels * kernel[0] * kernel[1] * kernel[2];
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> w(static_cast<std::size_t>(out_channels * fan_in));
  for (auto& v : w) v = static_cast<T>(dist(rng));
  weight_ = Tensor<T>({out_channels, in_channels, kernel[0], kernel[1], kernel[2]},
                      std::move(w), true);
  bias_ = Tensor<T>::zeros({out_channels}, true);
}

template <typename T>
Tensor<T> Conv3dLayer<T>::forward(const Tensor<T>& x) const {
  return conv3d(x, weight_, bias_, stride_, padding_);
}

template <typename T>
void Conv3dLayer<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

template <typename T>
std::int64_t Conv3dLayer<T>::parameter_count(std::int64_t in_channels,
                                             std::int64_t out_channels, Dims3 kernel) {
  if (in_channels == 0 || out_channels == 0) return 0;
  return out_channels * in_channels * kernel[0] * kernel[1] * kernel[2] + out_channels;
}

template <typename T>
AcbBlock<T>::AcbBlock(std::int64_t in_channels, std::int64_t out_channels, Rng& rng,
                      std::int64_t mid_channels) {
  const std::int64_t mid = mid_channels > 0 ? mid_channels : out_channels;
  conv1_ = Conv3dLayer<T>(in_channels, mid, {1, 3, 3}, {1, 1, 1}, {0, 1, 1}, rng);
  conv2_ = Conv3dLayer<T>(mid, out_channels, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, rng);
  conv3_ = Conv3dLayer<T>(out_channels, out_channels, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, rng);
  if (mid != out_channels) {
    skip_.emplace(mid, out_channels, Dims3{1, 1, 1}, Dims3{1, 1, 1}, Dims3{0, 0, 0}, rng);
  }
}

template <typename T>
Tensor<T> AcbBlock<T>::forward(const Tensor<T>& x) const {
  const Tensor<T> c1 = conv1_.forward(x);
  const Tensor<T> h2 = relu(conv2_.forward(relu(c1)));
  const Tensor<T> c3 = conv3_.forward(h2);
  const Tensor<T> shortcut = skip_ ? skip_->forward(c1) : c1;
  return relu(add(c3, shortcut));
}

template <typename T>
void AcbBlock<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  conv1_.collect(prefix + ".conv1", out);
  conv2_.collect(prefix + ".conv2", out);
  conv3_.collect(prefix + ".conv3", out);
  if (skip_) skip_->collect(prefix + ".skip", out);
}

template <typename T>
LayerNorm<T>::LayerNorm(std::int64_t channels, T eps)
    : gamma_(Tensor<T>::full({channels}, T(1), true)),
      beta_(Tensor<T>::zeros({channels}, true)),
      eps_(eps) {}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x) const {
  return layer_norm(x, gamma_, beta_, eps_);
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

template <typename T>
Tensor<T> layer_norm_axis(const Tensor<T>& x, int axis, const Tensor<T>& gamma,
                          const Tensor<T>& beta, T eps) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis == r - 1) return layer_norm(x, gamma, beta, eps);
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  order.erase(order.begin() + axis);
  order.push_back(axis);
  std::vector<int> inverse(r);
  for (int i = 0; i < r; ++i) inverse[order[i]] = i;
  return permute(layer_norm(permute(x, order), gamma, beta, eps), inverse);
}

template <typename T>
Tensor<T> glorot(std::int64_t rows, std::int64_t cols, Rng& rng, T gain) {
  const double bound = static_cast<double>(gain) * std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> w(static_cast<std::size_t>(rows * cols));
  for (auto& v : w) v = static_cast<T>(dist(rng));
  return Tensor<T>({rows, cols}, std::move(w), true);
}

template class Conv3dLayer<float>;
template class Conv3dLayer<double>;
template class AcbBlock<float>;
template class AcbBlock<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template Tensor<float> layer_norm_axis(const Tensor<float>&, int, const Tensor<float>&,
                                       const Tensor<float>&, float);
template Tensor<double> layer_norm_axis(const Tensor<double>&, int, const Tensor<double>&,
                                        const Tensor<double>&, double);
template Tensor<float> glorot(std::int64_t, std::int64_t, Rng&, float);
template Tensor<double> glorot(std::int64_t, std::int64_t, Rng&, double);

}  // namespace stt::nn
