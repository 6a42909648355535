// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <utility>

#include "stt/core/tensor.hpp"

// Helpers for writing differentiable ops. An op computes its forward values,
// then calls make_result() with a backward closure; the closure receives the
// output node and pushes output.grad into each parent that requires grad.

namespace stt::autograd {

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
bool should_record(const std::vector<Tensor<T>>& inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const auto& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

template <typename T, typename Backward>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::vector<Tensor<T>> parents, const char* op,
                      Backward&& backward) {
  Tensor<T> out(std::move(shape), std::move(data));
  if (!should_record(parents)) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.op = op;
  for (auto& p : parents) node.parents.push_back(p.node());
  node.backward_fn = std::forward<Backward>(backward);
  Tape<T>::active()->record(out.node());
  return out;
}

/// Gradient buffer of parent `i`, or an empty span if it needs none.
template <typename T>
std::span<T> parent_grad(TensorNode<T>& out, std::size_t i) {
  auto& p = *out.parents[i];
  if (!p.requires_grad) return {};
  return p.grad_buffer();
}

template <typename T>
const TensorNode<T>& parent(const TensorNode<T>& out, std::size_t i) {
  return *out.parents[i];
}

}  // namespace stt::autograd
