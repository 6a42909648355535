// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "stt/core/tensor.hpp"

// Differentiable tensor ops. All of them record onto the active Tape when at
// least one input requires grad, and are plain value computations otherwise.

namespace stt {

/// Batched matrix product. Leading batch extents must agree, or one side may
/// omit them (or use extent 1) to be shared across the batch.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& order);
/// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start,
                std::int64_t length);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
/// x[..., n] + bias[n]
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
/// log(sigmoid(x)), stable for large |x|.
template <typename T>
Tensor<T> log_sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> abs(const Tensor<T>& x);

/// Sum of all elements, shape (1,).
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
/// Reduces `axis` away.
template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);

/// Normalizes along the last axis, then applies gamma/beta (both shape [n]).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));

/// Mean binary cross-entropy with logits against a constant target.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target);

}  // namespace stt
