// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace stt::oracle {

GradCheckResult grad_check_named(const std::function<Tensor<double>()>& loss,
                                 std::vector<std::pair<std::string, Tensor<double>>> wrt,
                                 double h, double floor,
                                 std::int64_t max_elements_per_tensor) {
  for (auto& [name, t] : wrt) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape<double> tape;
    auto scope = tape.activate();
    Tensor<double> l = loss();
    tape.backward(l);
  }
  GradCheckResult result;
  for (auto& [name, t] : wrt) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(static_cast<std::size_t>(t.numel()), 0.0);
    auto values = t.mutable_data();
    const std::int64_t n = max_elements_per_tensor < 0
                               ? t.numel()
                               : std::min<std::int64_t>(t.numel(), max_elements_per_tensor);
    // Spread the checked elements over the tensor when subsampling.
    const std::int64_t stride = std::max<std::int64_t>(1, t.numel() / std::max<std::int64_t>(n, 1));
    double max_diff = 0.0, max_num = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(k * stride);
      const double orig = values[i];
      values[i] = orig + h;
      const double lp = loss().item();
      values[i] = orig - h;
      const double lm = loss().item();
      values[i] = orig;
      const double numeric = (lp - lm) / (2 * h);
      max_diff = std::max(max_diff, std::abs(numeric - analytic[i]));
      max_num = std::max(max_num, std::abs(numeric));
      ++result.checked;
    }
    const double rel = max_diff / std::max(max_num, floor);
    if (rel >= result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_tensor = name;
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           std::vector<Tensor<double>> wrt, double h, double floor,
                           std::int64_t max_elements_per_tensor) {
  std::vector<std::pair<std::string, Tensor<double>>> named;
  for (std::size_t i = 0; i < wrt.size(); ++i) named.emplace_back("#" + std::to_string(i), wrt[i]);
  return grad_check_named(loss, std::move(named), h, floor, max_elements_per_tensor);
}

}  // namespace stt::oracle
