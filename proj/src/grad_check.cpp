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

#include <algorithm>
#include <cmath>

#include "nirv/optim.hpp"

namespace nirv {

GradCheckReport grad_check(const LossFn& loss, const GradFn& analytic,
                           std::vector<Tensor<double>> inputs, double tolerance,
                           double h, double floor) {
  const std::vector<Tensor<double>> grads = analytic(inputs);
  check(grads.size() == inputs.size(), ErrorCode::kShapeMismatch,
        "grad_check: one gradient per input expected");
  GradCheckReport report;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    expect_shape(grads[t].shape, inputs[t].shape, "grad_check gradient");
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double saved = inputs[t][i];
      inputs[t][i] = saved + h;
      const double up = loss(inputs);
      inputs[t][i] = saved - h;
      const double down = loss(inputs);
      inputs[t][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grads[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / denom;
      if (!(err <= report.max_rel_error)) {  // also catches NaN
        report.max_rel_error = std::isnan(err) ? INFINITY : err;
        report.worst_input = t;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.checked;
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace nirv
