// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "stt/core/error.hpp"

namespace stt {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);

template <typename T>
class Tape;

/// Storage and autodiff bookkeeping behind a Tensor handle.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(TensorNode&)> backward_fn;
  Tape<T>* tape = nullptr;
  std::int64_t tape_index = -1;

  /// Zero-filled on first use.
  std::span<T> grad_buffer();
};

/// Dense row-major tensor handle. Copies share the underlying node, so a
/// parameter handed to an optimizer and a module refer to the same values.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<TensorNode<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  /// Negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

  std::span<const T> data() const { return node_->data; }
  /// Only valid on leaves; recorded intermediates are immutable.
  std::span<T> mutable_data();
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  /// Leaf copy of the values, cut from any graph.
  Tensor detach() const;
  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Reverse-mode tape. Ops executed while a tape is active (and touching a
/// tensor that requires grad) are recorded in creation order, which is a
/// valid topological order; backward walks it in reverse. A tape can be
/// consumed once and must be reset before the next backward.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  class [[nodiscard]] Scope {
   public:
    explicit Scope(Tape* tape);
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    ~Scope();

   private:
    Tape* previous_;
  };

  Scope activate() { return Scope(this); }
  static Tape* active();

  void record(const std::shared_ptr<TensorNode<T>>& node);
  void backward(const Tensor<T>& loss);
  /// Drops recorded nodes (and the activations they hold).
  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<std::shared_ptr<TensorNode<T>>> nodes_;
  bool consumed_ = false;
};

/// Backward through the tape `loss` was recorded on.
template <typename T>
void backward(const Tensor<T>& loss);

extern template struct TensorNode<float>;
extern template struct TensorNode<double>;
extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace stt
