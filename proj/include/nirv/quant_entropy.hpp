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

// Quantized weight latents and the learned entropy model used to penalize
// their rate during training, plus the post-training frequency tables that
// drive the arithmetic coder.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nirv/byte_io.hpp"
#include "nirv/tensor.hpp"

namespace nirv {

using Rng = std::mt19937_64;

// Round half away from zero.
template <typename T>
std::int32_t round_latent(T v) {
  return static_cast<std::int32_t>(std::lround(v));
}

// A weight tensor W = scale * round(surrogate). The surrogate is the
// continuous training variable; only its rounded value and the scale ship.
template <typename T>
struct QuantizedLatent {
  Tensor<T> surrogate;
  T scale = T(1);

  const Shape& shape() const { return surrogate.shape; }
  std::size_t size() const { return surrogate.size(); }
  std::vector<std::int32_t> latent() const { return ste_round(surrogate.span()); }

  // Keeps each surrogate within rounding distance of `values`.
  void bind(std::span<const std::int32_t> values);

  static std::vector<std::int32_t> ste_round(std::span<const T> surrogate);
};

// W = reshape(scale * latent). Elementwise products are computed in T.
template <typename T>
Tensor<T> decode_weights(std::span<const std::int32_t> latent, T scale,
                         const Shape& shape);

template <typename T>
Tensor<T> decode_weights(const QuantizedLatent<T>& q) {
  return decode_weights<T>(q.latent(), q.scale, q.shape());
}

// Straight-through rounding: forward rounds, backward is the identity.
template <typename T>
Tensor<T> ste_round(const Tensor<T>& surrogate);
template <typename T>
Tensor<T> ste_round_backward(const Tensor<T>& grad_out) {
  return grad_out;
}

// surrogate + n, n ~ U(-1/2, 1/2) i.i.d.
template <typename T>
Tensor<T> noisy_sample(const Tensor<T>& surrogate, Rng& rng);

// Draws only the noise term, with the same stream consumption as noisy_sample.
template <typename T>
Tensor<T> uniform_noise(const Shape& shape, Rng& rng);

// Learned univariate CDF: three affine stages with softplus-positive weights,
// the first two followed by x + tanh(a) * tanh(x), then a sigmoid. Filters
// run 1 -> 3 -> 3 -> 1, so the map is strictly increasing by construction.
template <typename T>
class ProbabilityModel {
 public:
  static constexpr int kWidth = 3;
  static constexpr std::size_t kNumParams = 28;
  static constexpr T kLikelihoodFloor = T(1e-9);

  ProbabilityModel();
  explicit ProbabilityModel(Rng& rng, double init_scale = 10.0);

  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }

  // Pre-sigmoid CDF value.
  T logit(T x) const;
  T cdf(T x) const;
  // C(x + 1/2) - C(x - 1/2), floored at kLikelihoodFloor.
  T likelihood(T x) const;

  // Sum of -log2 likelihood over `samples`. Gradients, when non-empty spans
  // are passed, are accumulated (+=).
  T self_information(std::span<const T> samples, std::span<T> grad_samples,
                     std::span<T> grad_params) const;

  template <typename U>
  ProbabilityModel<U> cast() const {
    ProbabilityModel<U> out;
    for (std::size_t i = 0; i < kNumParams; ++i) out.params()[i] = static_cast<U>(params_[i]);
    return out;
  }

 private:
  std::array<T, kNumParams> params_{};
};

template <typename T>
T likelihood(const ProbabilityModel<T>& pm, T x) {
  return pm.likelihood(x);
}

// Rate term: sum over tensors of -log2 p(surrogate + noise). `noise` holds one
// tensor per latent. Gradients are accumulated when the output vectors are
// non-null.
template <typename T>
T entropy_loss(std::span<const QuantizedLatent<T>* const> latents,
               std::span<const ProbabilityModel<T>> models,
               std::span<const Tensor<T>> noise,
               std::vector<Tensor<T>>* grad_surrogates = nullptr,
               std::vector<std::array<T, ProbabilityModel<T>::kNumParams>>* grad_models =
                   nullptr);

// Convenience overload that draws fresh noise from `rng`.
template <typename T>
T entropy_loss(std::span<const QuantizedLatent<T>* const> latents,
               std::span<const ProbabilityModel<T>> models, Rng& rng);

// Symbol counts over [min_symbol, max_symbol] with add-one smoothing.
struct FrequencyTable {
  static constexpr std::uint32_t kMaxWidth = 1u << 20;

  std::int32_t min_symbol = 0;
  std::vector<std::uint32_t> counts;
  std::uint64_t total = 0;

  std::int32_t max_symbol() const {
    return min_symbol + static_cast<std::int32_t>(counts.size()) - 1;
  }
  bool contains(std::int64_t s) const {
    return !counts.empty() && s >= min_symbol && s <= max_symbol();
  }
  std::uint32_t count(std::int32_t s) const { return counts[s - min_symbol]; }
  // Empirical code length in bits of `symbols` under this table.
  double code_length_bits(std::span<const std::int32_t> symbols) const;

  void serialize(ByteWriter& out) const;
  static FrequencyTable deserialize(ByteReader& in);

  bool operator==(const FrequencyTable&) const = default;
};

FrequencyTable build_frequency_table(std::span<const std::int32_t> symbols);

}  // namespace nirv
