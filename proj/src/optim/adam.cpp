// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "stt/optim/adam.hpp"

#include <cmath>

#include "stt/core/error.hpp"

namespace stt::optim {

template <typename T>
Adam<T>::Adam(nn::ParamList<T> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg.lr > 0) || !(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1) ||
      !(cfg.eps > 0)) {
    throw ValidationError("adam: need lr > 0, 0 <= beta < 1, eps > 0");
  }
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), T(0));
    v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  ++steps_;
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_)));
  const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& p = params_[i].tensor;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
std::vector<CheckpointRecord> Adam<T>::state_records(const std::string& prefix) const {
  std::vector<CheckpointRecord> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Shape& s = params_[i].tensor.shape();
    out.push_back({prefix + ".m." + params_[i].name, "optimizer", s, {m_[i].begin(), m_[i].end()}});
    out.push_back({prefix + ".v." + params_[i].name, "optimizer", s, {v_[i].begin(), v_[i].end()}});
  }
  return out;
}

template <typename T>
void Adam<T>::load_state(const Checkpoint& ck, const std::string& prefix, std::int64_t steps) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto [tag, dst] : {std::pair{".m.", &m_[i]}, std::pair{".v.", &v_[i]}}) {
      const std::string name = prefix + tag + params_[i].name;
      const CheckpointRecord* r = ck.find(name);
      if (r == nullptr) throw IoError("checkpoint lacks optimizer state '" + name + "'");
      if (r->values.size() != dst->size()) {
        throw IoError("optimizer state '" + name + "' has the wrong size");
      }
      for (std::size_t j = 0; j < dst->size(); ++j) (*dst)[j] = static_cast<T>(r->values[j]);
    }
  }
  steps_ = steps;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace stt::optim
