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

#include "nirv/quant_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>

namespace nirv {

// --- latents ---------------------------------------------------------------

template <typename T>
std::vector<std::int32_t> QuantizedLatent<T>::ste_round(std::span<const T> surrogate) {
  std::vector<std::int32_t> out(surrogate.size());
  std::transform(surrogate.begin(), surrogate.end(), out.begin(), round_latent<T>);
  return out;
}

template <typename T>
void QuantizedLatent<T>::bind(std::span<const std::int32_t> values) {
  check(values.size() == surrogate.size(), ErrorCode::kShapeMismatch,
        "bind: latent count differs from surrogate");
  std::transform(values.begin(), values.end(), surrogate.data.begin(),
                 [](std::int32_t v) { return static_cast<T>(v); });
}

template <typename T>
Tensor<T> decode_weights(std::span<const std::int32_t> latent, T scale,
                         const Shape& shape) {
  check(latent.size() == shape_size(shape), ErrorCode::kShapeMismatch,
        "decode_weights: latent count differs from target shape");
  Tensor<T> out(shape);
  for (std::size_t i = 0; i < latent.size(); ++i) {
    out[i] = scale * static_cast<T>(latent[i]);
  }
  return out;
}

template <typename T>
Tensor<T> ste_round(const Tensor<T>& surrogate) {
  Tensor<T> out(surrogate.shape);
  for (std::size_t i = 0; i < surrogate.size(); ++i) {
    out[i] = static_cast<T>(round_latent(surrogate[i]));
  }
  return out;
}

template <typename T>
Tensor<T> uniform_noise(const Shape& shape, Rng& rng) {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Tensor<T> out(shape);
  for (auto& v : out.data) {
    // Narrowing to float may round 0.5 - ulp up to 0.5; keep the support
    // half-open.
    T n = static_cast<T>(dist(rng));
    v = n >= T(0.5) ? std::nextafter(T(0.5), T(0)) : n;
  }
  return out;
}

template <typename T>
Tensor<T> noisy_sample(const Tensor<T>& surrogate, Rng& rng) {
  Tensor<T> out = uniform_noise<T>(surrogate.shape, rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += surrogate[i];
  return out;
}

// --- probability model ------------------------------------------------------

namespace {

// Parameter layout: matrix1 (3), bias1 (3), factor1 (3), matrix2 (3x3),
// bias2 (3), factor2 (3), matrix3 (1x3), bias3 (1).
constexpr std::size_t kM1 = 0, kB1 = 3, kA1 = 6, kM2 = 9, kB2 = 18, kA2 = 21,
                      kM3 = 24, kB3 = 27;

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

// tanh through a single exponential; glibc's expf is several times faster
// than tanhf and the result stays within a few ulp of 1 in magnitude.
template <typename T>
T tanh_fast(T x) {
  if constexpr (std::is_same_v<T, float>) {
    if (std::abs(x) < 0.125f) return std::tanh(x);
    const float e = std::exp(-2.0f * std::abs(x));
    return std::copysign((1.0f - e) / (1.0f + e), x);
  } else {
    return std::tanh(x);
  }
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Constrained parameters derived once per evaluation batch.
template <typename T>
struct Effective {
  T m1[3], b1[3], a1[3], m2[9], b2[3], a2[3], m3[3], b3;
};

template <typename T>
Effective<T> effective(std::span<const T> p) {
  Effective<T> e;
  for (int i = 0; i < 3; ++i) {
    e.m1[i] = softplus(p[kM1 + i]);
    e.b1[i] = p[kB1 + i];
    e.a1[i] = std::tanh(p[kA1 + i]);
    e.b2[i] = p[kB2 + i];
    e.a2[i] = std::tanh(p[kA2 + i]);
    e.m3[i] = softplus(p[kM3 + i]);
  }
  for (int i = 0; i < 9; ++i) e.m2[i] = softplus(p[kM2 + i]);
  e.b3 = p[kB3];
  return e;
}

template <typename T>
struct Trace {
  T t1[3], g1[3], t2[3], g2[3];
};

template <typename T>
T eval_logit(const Effective<T>& e, T z, Trace<T>& tr) {
  for (int i = 0; i < 3; ++i) {
    const T pre = e.m1[i] * z + e.b1[i];
    tr.t1[i] = tanh_fast(pre);
    tr.g1[i] = pre + e.a1[i] * tr.t1[i];
  }
  for (int i = 0; i < 3; ++i) {
    const T pre = e.m2[3 * i] * tr.g1[0] + e.m2[3 * i + 1] * tr.g1[1] +
                  e.m2[3 * i + 2] * tr.g1[2] + e.b2[i];
    tr.t2[i] = tanh_fast(pre);
    tr.g2[i] = pre + e.a2[i] * tr.t2[i];
  }
  return e.m3[0] * tr.g2[0] + e.m3[1] * tr.g2[1] + e.m3[2] * tr.g2[2] + e.b3;
}

// Gradient accumulators with respect to the effective (constrained) values.
template <typename A>
struct EffectiveGradT {
  A m1[3]{}, b1[3]{}, a1[3]{}, m2[9]{}, b2[3]{}, a2[3]{}, m3[3]{}, b3 = 0;

  template <typename B>
  void flush_into(EffectiveGradT<B>& out) {
    for (int i = 0; i < 3; ++i) {
      out.m1[i] += m1[i];
      out.b1[i] += b1[i];
      out.a1[i] += a1[i];
      out.b2[i] += b2[i];
      out.a2[i] += a2[i];
      out.m3[i] += m3[i];
    }
    for (int i = 0; i < 9; ++i) out.m2[i] += m2[i];
    out.b3 += b3;
    *this = EffectiveGradT{};
  }
};
using EffectiveGrad = EffectiveGradT<double>;

// Returns d logit / dz scaled by dout and accumulates parameter gradients.
template <typename T, typename A>
T backprop_logit(const Effective<T>& e, T z, const Trace<T>& tr, T dout,
                 EffectiveGradT<A>* acc) {
  T dpre2[3];
  for (int i = 0; i < 3; ++i) {
    const T dg2 = dout * e.m3[i];
    dpre2[i] = dg2 * (T(1) + e.a2[i] * (T(1) - tr.t2[i] * tr.t2[i]));
    if (acc) {
      acc->m3[i] += dout * tr.g2[i];
      acc->a2[i] += dg2 * tr.t2[i];
      acc->b2[i] += dpre2[i];
    }
  }
  if (acc) acc->b3 += dout;
  T dz = 0;
  for (int k = 0; k < 3; ++k) {
    const T dg1 = dpre2[0] * e.m2[k] + dpre2[1] * e.m2[3 + k] + dpre2[2] * e.m2[6 + k];
    const T dpre1 = dg1 * (T(1) + e.a1[k] * (T(1) - tr.t1[k] * tr.t1[k]));
    dz += dpre1 * e.m1[k];
    if (acc) {
      for (int i = 0; i < 3; ++i) acc->m2[3 * i + k] += dpre2[i] * tr.g1[k];
      acc->a1[k] += dg1 * tr.t1[k];
      acc->b1[k] += dpre1;
      acc->m1[k] += dpre1 * z;
    }
  }
  return dz;
}

template <typename T>
void project_grad(std::span<const T> p, const EffectiveGrad& g, std::span<T> out) {
  // d softplus(x) / dx = sigmoid(x); d tanh(x) / dx = 1 - tanh(x)^2.
  auto dsp = [&](std::size_t i, double v) { out[i] += static_cast<T>(v * sigmoid(p[i])); };
  auto dth = [&](std::size_t i, double v) {
    const double t = std::tanh(static_cast<double>(p[i]));
    out[i] += static_cast<T>(v * (1.0 - t * t));
  };
  for (std::size_t i = 0; i < 3; ++i) {
    dsp(kM1 + i, g.m1[i]);
    out[kB1 + i] += static_cast<T>(g.b1[i]);
    dth(kA1 + i, g.a1[i]);
    out[kB2 + i] += static_cast<T>(g.b2[i]);
    dth(kA2 + i, g.a2[i]);
    dsp(kM3 + i, g.m3[i]);
  }
  for (std::size_t i = 0; i < 9; ++i) dsp(kM2 + i, g.m2[i]);
  out[kB3] += static_cast<T>(g.b3);
}

// Interval probability with the sign flip that keeps the difference of
// sigmoids away from catastrophic cancellation in the upper tail.
template <typename T>
T interval_probability(T upper, T lower, T* d_upper, T* d_lower) {
  const T s = (upper + lower) > T(0) ? T(-1) : T(1);
  const T su = sigmoid(s * upper);
  const T sl = sigmoid(s * lower);
  if (d_upper) *d_upper = su * (T(1) - su);
  if (d_lower) *d_lower = -(sl * (T(1) - sl));
  return std::abs(su - sl);
}

}  // namespace

template <typename T>
ProbabilityModel<T>::ProbabilityModel() = default;

template <typename T>
ProbabilityModel<T>::ProbabilityModel(Rng& rng, double init_scale) {
  // Factorized-prior initialization: the stacked softplus matrices start out
  // multiplying to 1 / init_scale, i.e. a CDF roughly init_scale wide.
  constexpr int filters[4] = {1, kWidth, kWidth, 1};
  const double scale = std::pow(init_scale, 1.0 / 3.0);
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  const std::size_t matrices[3] = {kM1, kM2, kM3};
  const std::size_t sizes[3] = {3, 9, 3};
  for (int k = 0; k < 3; ++k) {
    const T init = static_cast<T>(std::log(std::expm1(1.0 / scale / filters[k + 1])));
    std::fill_n(params_.begin() + matrices[k], sizes[k], init);
  }
  for (std::size_t i : {kB1, kB1 + 1, kB1 + 2, kB2, kB2 + 1, kB2 + 2, kB3}) {
    params_[i] = static_cast<T>(bias(rng));
  }
  // Factors start at zero, which is already what params_ holds.
}

template <typename T>
T ProbabilityModel<T>::logit(T x) const {
  const Effective<T> e = effective<T>(params_);
  Trace<T> tr;
  return eval_logit(e, x, tr);
}

template <typename T>
T ProbabilityModel<T>::cdf(T x) const {
  return sigmoid(logit(x));
}

template <typename T>
T ProbabilityModel<T>::likelihood(T x) const {
  const Effective<T> e = effective<T>(params_);
  Trace<T> tu, tl;
  const T p = interval_probability(eval_logit(e, x + T(0.5), tu),
                                   eval_logit(e, x - T(0.5), tl), static_cast<T*>(nullptr),
                                   static_cast<T*>(nullptr));
  return std::max(p, kLikelihoodFloor);
}

template <typename T>
T ProbabilityModel<T>::self_information(std::span<const T> samples,
                                        std::span<T> grad_samples,
                                        std::span<T> grad_params) const {
  const bool want_x = !grad_samples.empty();
  const bool want_p = !grad_params.empty();
  check(!want_x || grad_samples.size() == samples.size(), ErrorCode::kShapeMismatch,
        "self_information: gradient span size");
  check(!want_p || grad_params.size() == kNumParams, ErrorCode::kShapeMismatch,
        "self_information: parameter gradient span size");
  const Effective<T> e = effective<T>(params_);
  const T inv_ln2 = static_cast<T>(1.0 / std::numbers::ln2);
  EffectiveGrad acc;
  // Short blocks accumulate in T and flush into double accumulators.
  constexpr std::size_t kBlock = 256;
  EffectiveGradT<T> block;
  double bits = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i % kBlock == 0 && want_p) block.flush_into(acc);
    const T x = samples[i];
    Trace<T> tu, tl;
    const T u = eval_logit(e, x + T(0.5), tu);
    const T l = eval_logit(e, x - T(0.5), tl);
    T du = 0, dl = 0;
    const T p = interval_probability(u, l, &du, &dl);
    if (p <= kLikelihoodFloor) {
      // Floored: constant contribution, zero gradient.
      bits -= std::log2(static_cast<double>(kLikelihoodFloor));
      continue;
    }
    bits -= std::log2(p);
    if (!want_x && !want_p) continue;
    const T dbits_dp = -inv_ln2 / p;
    EffectiveGradT<T>* a = want_p ? &block : nullptr;
    const T dx = backprop_logit(e, x + T(0.5), tu, dbits_dp * du, a) +
                 backprop_logit(e, x - T(0.5), tl, dbits_dp * dl, a);
    if (want_x) grad_samples[i] += dx;
  }
  if (want_p) {
    block.flush_into(acc);
    project_grad<T>(params_, acc, grad_params);
  }
  return static_cast<T>(bits);
}

template <typename T>
T entropy_loss(std::span<const QuantizedLatent<T>* const> latents,
               std::span<const ProbabilityModel<T>> models,
               std::span<const Tensor<T>> noise, std::vector<Tensor<T>>* grad_surrogates,
               std::vector<std::array<T, ProbabilityModel<T>::kNumParams>>* grad_models) {
  check(latents.size() == models.size() && latents.size() == noise.size(),
        ErrorCode::kShapeMismatch, "entropy_loss: one model and noise tensor per latent");
  if (grad_surrogates) {
    check(grad_surrogates->size() == latents.size(), ErrorCode::kShapeMismatch,
          "entropy_loss: surrogate gradient count");
  }
  if (grad_models) {
    check(grad_models->size() == latents.size(), ErrorCode::kShapeMismatch,
          "entropy_loss: model gradient count");
  }
  T total = 0;
  std::vector<T> samples;
  for (std::size_t k = 0; k < latents.size(); ++k) {
    const Tensor<T>& s = latents[k]->surrogate;
    expect_shape(noise[k].shape, s.shape, "entropy_loss noise");
    samples.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) samples[i] = s[i] + noise[k][i];
    std::span<T> gx;
    if (grad_surrogates) {
      expect_shape((*grad_surrogates)[k].shape, s.shape, "entropy_loss gradient");
      gx = (*grad_surrogates)[k].span();
    }
    std::span<T> gp;
    if (grad_models) gp = (*grad_models)[k];
    total += models[k].self_information(samples, gx, gp);
  }
  return total;
}

template <typename T>
T entropy_loss(std::span<const QuantizedLatent<T>* const> latents,
               std::span<const ProbabilityModel<T>> models, Rng& rng) {
  std::vector<Tensor<T>> noise;
  noise.reserve(latents.size());
  for (const auto* q : latents) noise.push_back(uniform_noise<T>(q->shape(), rng));
  return entropy_loss<T>(latents, models, noise);
}

// --- frequency tables -------------------------------------------------------

FrequencyTable build_frequency_table(std::span<const std::int32_t> symbols) {
  check(!symbols.empty(), ErrorCode::kEmptyTensor, "frequency table of empty tensor");
  const auto [lo, hi] = std::minmax_element(symbols.begin(), symbols.end());
  const std::int64_t width = static_cast<std::int64_t>(*hi) - *lo + 1;
  check(width <= FrequencyTable::kMaxWidth, ErrorCode::kSymbolOutOfRange,
        "symbol range too wide for a frequency table");
  FrequencyTable table;
  table.min_symbol = *lo;
  table.counts.assign(static_cast<std::size_t>(width), 1u);
  for (std::int32_t s : symbols) ++table.counts[static_cast<std::size_t>(s - *lo)];
  table.total = symbols.size() + static_cast<std::uint64_t>(width);
  check(table.total < (std::uint64_t{1} << 32), ErrorCode::kSymbolOutOfRange,
        "too many symbols for 32-bit frequency precision");
  return table;
}

double FrequencyTable::code_length_bits(std::span<const std::int32_t> symbols) const {
  double bits = 0.0;
  const double log_total = std::log2(static_cast<double>(total));
  for (std::int32_t s : symbols) {
    check(contains(s), ErrorCode::kSymbolOutOfRange, "symbol outside table");
    bits += log_total - std::log2(static_cast<double>(count(s)));
  }
  return bits;
}

void FrequencyTable::serialize(ByteWriter& out) const {
  out.svarint(min_symbol);
  out.varint(counts.size());
  for (std::uint32_t c : counts) out.varint(c);
}

FrequencyTable FrequencyTable::deserialize(ByteReader& in) {
  FrequencyTable table;
  const std::int64_t min_symbol = in.svarint();
  const std::uint64_t width = in.varint();
  if (width == 0 || width > kMaxWidth ||
      min_symbol < std::numeric_limits<std::int32_t>::min() ||
      min_symbol + static_cast<std::int64_t>(width) - 1 >
          std::numeric_limits<std::int32_t>::max()) {
    fail(ErrorCode::kCorruptStream, "frequency table range is invalid");
  }
  table.min_symbol = static_cast<std::int32_t>(min_symbol);
  table.counts.resize(width);
  for (auto& c : table.counts) {
    const std::uint64_t v = in.varint();
    if (v == 0 || v > 0xFFFFFFFFu) fail(ErrorCode::kCorruptStream, "bad frequency count");
    c = static_cast<std::uint32_t>(v);
    table.total += v;
  }
  if (table.total >= (std::uint64_t{1} << 32)) {
    fail(ErrorCode::kCorruptStream, "frequency table total overflows");
  }
  return table;
}

#define NIRV_INSTANTIATE_QUANT(T)                                                       \
  template struct QuantizedLatent<T>;                                                   \
  template class ProbabilityModel<T>;                                                   \
  template Tensor<T> decode_weights(std::span<const std::int32_t>, T, const Shape&);    \
  template Tensor<T> ste_round(const Tensor<T>&);                                       \
  template Tensor<T> uniform_noise(const Shape&, Rng&);                                 \
  template Tensor<T> noisy_sample(const Tensor<T>&, Rng&);                              \
  template T entropy_loss(std::span<const QuantizedLatent<T>* const>,                   \
                          std::span<const ProbabilityModel<T>>,                         \
                          std::span<const Tensor<T>>, std::vector<Tensor<T>>*,          \
                          std::vector<std::array<T, ProbabilityModel<T>::kNumParams>>*); \
  template T entropy_loss(std::span<const QuantizedLatent<T>* const>,                   \
                          std::span<const ProbabilityModel<T>>, Rng&);

NIRV_INSTANTIATE_QUANT(float)
NIRV_INSTANTIATE_QUANT(double)

#undef NIRV_INSTANTIATE_QUANT

}  // namespace nirv
