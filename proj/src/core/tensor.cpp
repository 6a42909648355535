// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/core/tensor.hpp"

#include <sstream>

namespace stt {

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
std::span<T> TensorNode<T>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<TensorNode<T>>()) {
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (stt::numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("shape " + shape_str(shape) + " needs " +
                     std::to_string(stt::numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = stt::numel(shape);
  return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value),
                requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return Tensor(Shape{1}, std::vector<T>{value});
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("axis out of range for shape " + shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(axis)];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (node_->tape_index >= 0) {
    throw GraphError("cannot mutate a recorded intermediate tensor");
  }
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single element, shape is " + shape_str(shape()));
  }
  return node_->data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  if (node_->tape_index >= 0) {
    throw GraphError("requires_grad can only be set on leaves");
  }
  node_->requires_grad = value;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------

template <typename T>
struct ActiveTape {
  static Tape<T>*& get() {
    thread_local Tape<T>* tape = nullptr;
    return tape;
  }
};

template <typename T>
Tape<T>::~Tape() {
  if (ActiveTape<T>::get() == this) ActiveTape<T>::get() = nullptr;
  reset();
}

template <typename T>
Tape<T>::Scope::Scope(Tape* tape) : previous_(ActiveTape<T>::get()) {
  ActiveTape<T>::get() = tape;
}

template <typename T>
Tape<T>::Scope::~Scope() {
  ActiveTape<T>::get() = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return ActiveTape<T>::get();
}

template <typename T>
void Tape<T>::record(const std::shared_ptr<TensorNode<T>>& node) {
  if (consumed_) {
    throw GraphError("tape already consumed by backward(); call reset() first");
  }
  node->tape = this;
  node->tape_index = static_cast<std::int64_t>(nodes_.size());
  nodes_.push_back(node);
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw GraphError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (consumed_) {
    throw GraphError("backward() called twice without reset()");
  }
  const auto& root = loss.node();
  if (root->tape != this) {
    throw GraphError("loss was not recorded on this tape");
  }
  consumed_ = true;
  root->grad_buffer()[0] += T(1);
  for (std::int64_t i = root->tape_index; i >= 0; --i) {
    auto& node = *nodes_[static_cast<std::size_t>(i)];
    if (node.grad.empty() || !node.backward_fn) continue;
    node.backward_fn(node);
  }
}

template <typename T>
void Tape<T>::reset() {
  for (auto& node : nodes_) {
    node->tape = nullptr;
    node->tape_index = -1;
    node->backward_fn = nullptr;
    node->parents.clear();
  }
  nodes_.clear();
  consumed_ = false;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.node()->tape == nullptr) {
    throw GraphError("backward() on a tensor that is not part of a recorded graph");
  }
  loss.node()->tape->backward(loss);
}

template struct TensorNode<float>;
template struct TensorNode<double>;
template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace stt
