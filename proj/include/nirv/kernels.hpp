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

// Forward and hand-derived backward kernels for the fixed network
// architecture. Every backward function overwrites the input gradient and
// accumulates (+=) into parameter gradients so shared parameters can be
// reused across calls. Loops run in a fixed order, so results are
// reproducible bit for bit on a given build.

#pragma once

#include "nirv/tensor.hpp"

namespace nirv::kernels {

// out[B, O] = in[B, I] * weight[O, I]^T + bias[O]
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& in, const Tensor<T>& weight,
                         const Tensor<T>& bias);

template <typename T>
Tensor<T> linear_backward(const Tensor<T>& in, const Tensor<T>& weight,
                          const Tensor<T>& grad_out, Tensor<T>& grad_weight,
                          Tensor<T>& grad_bias);

// out = sin(omega * x)
template <typename T>
Tensor<T> sine_forward(const Tensor<T>& x, T omega);

// Takes the pre-activation x.
template <typename T>
Tensor<T> sine_backward(const Tensor<T>& x, T omega, const Tensor<T>& grad_out);

// Same-size 3x3 cross-correlation, stride 1, zero padding 1.
// in [N, C_in, h, w], kernel [C_out, C_in, 3, 3], bias [C_out].
template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& in, const Tensor<T>& kernel,
                          const Tensor<T>& bias);

template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& in, const Tensor<T>& kernel,
                           const Tensor<T>& grad_out, Tensor<T>& grad_kernel,
                           Tensor<T>& grad_bias);

// [N, C*r*r, h, w] -> [N, C, h*r, w*r]; channel c*r*r + i*r + j lands at
// spatial offset (i, j).
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& in, int r);

// Exact inverse of pixel_shuffle, which is also its backward.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& in, int r);

}  // namespace nirv::kernels
