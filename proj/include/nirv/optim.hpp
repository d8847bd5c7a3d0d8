// Copyright 2026 The nirv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nirv/tensor.hpp"

namespace nirv {

template <typename T>
struct AdamState {
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : first_moment(n, T(0)), second_moment(n, T(0)) {}
};

// One bias-corrected Adam update of `param` in place.
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state,
               double lr) {
  check(param.size() == grad.size(), ErrorCode::kShapeMismatch,
        "adam: gradient size differs from parameter");
  check(lr > 0.0, ErrorCode::kInvalidConfig, "adam: learning rate must be positive");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(param.size(), T(0));
    state.second_moment.assign(param.size(), T(0));
  }
  check(state.first_moment.size() == param.size() &&
            state.second_moment.size() == param.size(),
        ErrorCode::kShapeMismatch, "adam: state size differs from parameter");
  ++state.step;
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, static_cast<double>(state.step)));
  const T eps = static_cast<T>(state.eps);
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    T& m = state.first_moment[i];
    T& v = state.second_moment[i];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g * g;
    param[i] -= step * (m / c1) / (std::sqrt(v / c2) + eps);
  }
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

using LossFn = std::function<double(const std::vector<Tensor<double>>&)>;
using GradFn =
    std::function<std::vector<Tensor<double>>(const std::vector<Tensor<double>>&)>;

// Compares `analytic` against central differences of `loss` over every
// element of every input. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const LossFn& loss, const GradFn& analytic,
                           std::vector<Tensor<double>> inputs, double tolerance,
                           double h = 1e-5, double floor = 1e-6);

}  // namespace nirv
