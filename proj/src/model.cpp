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

#include "nirv/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nirv/kernels.hpp"

namespace nirv {

namespace k = kernels;

// --- configuration ----------------------------------------------------------

std::vector<HeadBlock> default_head_blocks(int width, int patch, int head_base) {
  std::vector<HeadBlock> blocks;
  if (head_base <= 0 || patch % head_base != 0) return blocks;
  int remaining = patch / head_base;
  int channels = std::max(width / (head_base * head_base), 1);
  while (remaining > 1) {
    int factor = remaining;
    for (int f : {4, 2, 3}) {
      if (remaining % f == 0) {
        factor = f;
        break;
      }
    }
    remaining /= factor;
    channels = std::max(channels / 2, 4);
    blocks.push_back({factor, channels});
  }
  return blocks;
}

ModelConfig default_model_config() { return ModelConfig{}; }

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidConfig, what); };
  if (num_siren_layers < 1) bad("need at least one MLP layer");
  if (width < 2 || width % 2 != 0) bad("MLP width must be even and >= 2");
  if (group_size < 1 || group_size > 255) bad("group size must be in [1, 255]");
  if (patch_h < 1 || patch_w < 1 || patch_h > 255 || patch_w > 255) {
    bad("patch size must be in [1, 255]");
  }
  if (patch_h != patch_w) bad("the upsampling head requires square patches");
  if (head_base < 1 || width % (head_base * head_base) != 0) {
    bad("MLP width must be divisible by head_base^2");
  }
  int up = 1;
  for (const HeadBlock& b : head_blocks) {
    if (b.upsample < 1 || b.channels < 1) bad("head blocks need positive factors");
    up *= b.upsample;
  }
  if (head_base * up != patch_h) {
    bad("head upsampling (" + std::to_string(head_base * up) +
        ") does not reach the patch size (" + std::to_string(patch_h) + ")");
  }
  if (!(omega0 > 0) || !(positional_base > 0) || !(head_omega > 0) ||
      !(init_latent_levels > 0)) {
    bad("omega, positional base and latent levels must be positive");
  }
}

std::uint64_t ModelConfig::mlp_parameter_count() const {
  std::uint64_t n = 0;
  int in = 2;
  for (int l = 0; l < num_siren_layers; ++l) {
    n += static_cast<std::uint64_t>(width) * in + width;
    in = width;
  }
  return n;
}

std::uint64_t ModelConfig::head_parameter_count() const {
  std::uint64_t n = 0;
  int in = feature_channels();
  for (const HeadBlock& b : head_blocks) {
    const int out = b.channels * b.upsample * b.upsample;
    n += static_cast<std::uint64_t>(out) * in * 9 + out;
    in = b.channels;
  }
  return n + static_cast<std::uint64_t>(3) * in * 9 + 3;
}

std::vector<double> positional_encode(int t, int d, double base) {
  std::vector<double> out(static_cast<std::size_t>(d));
  for (int i = 0; i < d / 2; ++i) {
    const double arg = t / std::pow(base, 2.0 * i);
    out[2 * i] = std::sin(arg);
    out[2 * i + 1] = std::cos(arg);
  }
  return out;
}

// --- model container ---------------------------------------------------------

template <typename T>
std::vector<QuantizedLatent<T>*> GroupModel<T>::latents() {
  std::vector<QuantizedLatent<T>*> out;
  for (auto& l : siren) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

template <typename T>
std::vector<const QuantizedLatent<T>*> GroupModel<T>::latents() const {
  std::vector<const QuantizedLatent<T>*> out;
  for (const auto& l : siren) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>*> GroupModel<T>::head_tensors() {
  std::vector<Tensor<T>*> out;
  for (auto& c : head) {
    out.push_back(&c.kernel);
    out.push_back(&c.bias);
  }
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> GroupModel<T>::head_tensors() const {
  std::vector<const Tensor<T>*> out;
  for (const auto& c : head) {
    out.push_back(&c.kernel);
    out.push_back(&c.bias);
  }
  return out;
}

template <typename T>
std::vector<float> GroupModel<T>::head_values() const {
  std::vector<float> out;
  for (const Tensor<T>* t : head_tensors()) {
    for (T v : t->data) out.push_back(static_cast<float>(v));
  }
  return out;
}

template <typename T>
void GroupModel<T>::set_head_values(std::span<const float> values) {
  std::size_t pos = 0;
  for (Tensor<T>* t : head_tensors()) {
    check(pos + t->size() <= values.size(), ErrorCode::kShapeMismatch,
          "head value count too small");
    for (auto& v : t->data) v = static_cast<T>(values[pos++]);
  }
  check(pos == values.size(), ErrorCode::kShapeMismatch, "head value count too large");
}

template <typename T>
template <typename U>
GroupModel<U> GroupModel<T>::cast() const {
  GroupModel<U> out;
  out.config = config;
  for (const auto& l : siren) {
    SirenLayer<U> c;
    c.weight.surrogate = l.weight.surrogate.template cast<U>();
    c.weight.scale = static_cast<U>(l.weight.scale);
    c.bias.surrogate = l.bias.surrogate.template cast<U>();
    c.bias.scale = static_cast<U>(l.bias.scale);
    out.siren.push_back(std::move(c));
  }
  for (const auto& h : head) {
    out.head.push_back({h.kernel.template cast<U>(), h.bias.template cast<U>()});
  }
  return out;
}

template <typename T>
GroupModel<T> init_group_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  auto uniform = [&rng](Tensor<T>& t, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
  };
  // The latent surrogate starts at W / scale so that scale * round(.) is
  // within half a quantization step of the continuous initialization.
  auto bind = [&](QuantizedLatent<T>& q, const Shape& shape, double bound) {
    Tensor<T> w(shape);
    uniform(w, bound);
    q.scale = static_cast<T>(bound / config.init_latent_levels);
    q.surrogate = Tensor<T>(shape);
    for (std::size_t i = 0; i < w.size(); ++i) q.surrogate[i] = w[i] / q.scale;
  };

  GroupModel<T> model;
  model.config = config;
  std::size_t in = 2;
  const std::size_t width = static_cast<std::size_t>(config.width);
  for (int l = 0; l < config.num_siren_layers; ++l) {
    SirenLayer<T> layer;
    const double fan_in = static_cast<double>(in);
    const double w_bound =
        l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / config.omega0;
    bind(layer.weight, {width, in}, w_bound);
    bind(layer.bias, {width}, 1.0 / std::sqrt(fan_in));
    model.siren.push_back(std::move(layer));
    in = width;
  }

  std::size_t channels = static_cast<std::size_t>(config.feature_channels());
  auto add_conv = [&](std::size_t c_in, std::size_t c_out) {
    ConvLayer<T> conv{Tensor<T>({c_out, c_in, 3, 3}), Tensor<T>({c_out})};
    uniform(conv.kernel, config.head_init_gain * std::sqrt(6.0 / (9.0 * c_in)));
    model.head.push_back(std::move(conv));
  };
  for (const HeadBlock& b : config.head_blocks) {
    const std::size_t out = static_cast<std::size_t>(b.channels) * b.upsample * b.upsample;
    add_conv(channels, out);
    channels = static_cast<std::size_t>(b.channels);
  }
  add_conv(channels, 3);
  // Start the output at mid-gray.
  model.head.back().bias.fill(static_cast<T>(0.5));
  return model;
}

// --- forward / backward ------------------------------------------------------

namespace {

template <typename T>
Tensor<T> decode_for(const QuantizedLatent<T>& q, QuantMode mode) {
  Tensor<T> out(q.shape());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const T base = mode == QuantMode::kRound ? static_cast<T>(round_latent(q.surrogate[i]))
                                             : q.surrogate[i];
    out[i] = q.scale * base;
  }
  return out;
}

template <typename T>
std::vector<T> encoding_table(const ModelConfig& c) {
  std::vector<T> pe(static_cast<std::size_t>(c.group_size) * c.width);
  for (int t = 0; t < c.group_size; ++t) {
    const std::vector<double> v = positional_encode(t, c.width, c.positional_base);
    for (int j = 0; j < c.width; ++j) pe[t * c.width + j] = static_cast<T>(v[j]);
  }
  return pe;
}

}  // namespace

template <typename T>
Tensor<T> forward(const GroupModel<T>& model, std::span<const Centroid> centroids,
                  const ForwardOptions& options, ForwardCache<T>* cache) {
  const ModelConfig& c = model.config;
  const std::size_t batch = centroids.size();
  const std::size_t g = static_cast<std::size_t>(c.group_size);
  const std::size_t width = static_cast<std::size_t>(c.width);
  check(model.siren.size() == static_cast<std::size_t>(c.num_siren_layers) &&
            model.head.size() == c.head_blocks.size() + 1,
        ErrorCode::kShapeMismatch, "model layers do not match its config");

  Tensor<T> x({batch, 2});
  for (std::size_t b = 0; b < batch; ++b) {
    x[2 * b] = static_cast<T>(centroids[b].x);
    x[2 * b + 1] = static_cast<T>(centroids[b].y);
  }
  if (cache) {
    *cache = ForwardCache<T>{};
    cache->input = x;
  }
  const T omega0 = static_cast<T>(c.omega0);
  for (const SirenLayer<T>& layer : model.siren) {
    Tensor<T> w = decode_for(layer.weight, options.quant);
    Tensor<T> bias = decode_for(layer.bias, options.quant);
    Tensor<T> pre = k::linear_forward(x, w, bias);
    Tensor<T> next = k::sine_forward(pre, omega0);
    if (cache) {
      cache->siren_weights.push_back(std::move(w));
      cache->siren_biases.push_back(std::move(bias));
      cache->siren_inputs.push_back(std::move(x));
      cache->siren_pre.push_back(std::move(pre));
    }
    x = std::move(next);
  }

  // Replicate per frame and add the frame encoding; the result is read as
  // (B*G, C0, base, base).
  const std::size_t base = static_cast<std::size_t>(c.head_base);
  Tensor<T> h({batch * g, static_cast<std::size_t>(c.feature_channels()), base, base});
  const std::vector<T> pe = options.positional_encoding ? encoding_table<T>(c)
                                                        : std::vector<T>(g * width, T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < g; ++t) {
      T* dst = h.ptr() + (b * g + t) * width;
      for (std::size_t j = 0; j < width; ++j) dst[j] = x[b * width + j] + pe[t * width + j];
    }
  }

  const T head_omega = static_cast<T>(c.head_omega);
  for (std::size_t i = 0; i < c.head_blocks.size(); ++i) {
    Tensor<T> conv = k::conv3x3_forward(h, model.head[i].kernel, model.head[i].bias);
    Tensor<T> pre = k::pixel_shuffle(conv, c.head_blocks[i].upsample);
    Tensor<T> next = k::sine_forward(pre, head_omega);
    if (cache) {
      cache->head_inputs.push_back(std::move(h));
      cache->head_pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  Tensor<T> out = k::conv3x3_forward(h, model.head.back().kernel, model.head.back().bias);
  if (cache) cache->head_inputs.push_back(std::move(h));

  // [B*G, 3, P, P] -> [B, G, P, P, 3]
  const std::size_t ph = out.dim(2), pw = out.dim(3), plane = ph * pw;
  Tensor<T> volumes({batch, g, ph, pw, 3});
  for (std::size_t n = 0; n < batch * g; ++n) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const T* src = out.ptr() + (n * 3 + ch) * plane;
      T* dst = volumes.ptr() + n * plane * 3 + ch;
      for (std::size_t p = 0; p < plane; ++p) dst[p * 3] = src[p];
    }
  }
  return volumes;
}

template <typename T>
ModelGradients<T> ModelGradients<T>::zeros_like(const GroupModel<T>& model) {
  ModelGradients<T> g;
  for (const auto* q : model.latents()) {
    g.surrogates.emplace_back(q->shape());
    g.scales.push_back(T(0));
  }
  for (const auto* t : model.head_tensors()) g.head.emplace_back(t->shape);
  g.prob.assign(g.surrogates.size(), {});
  return g;
}

template <typename T>
void ModelGradients<T>::zero() {
  for (auto& t : surrogates) t.fill(T(0));
  std::fill(scales.begin(), scales.end(), T(0));
  for (auto& t : head) t.fill(T(0));
  for (auto& p : prob) p.fill(T(0));
}

template <typename T>
void backward(const GroupModel<T>& model, const ForwardCache<T>& cache,
              const Tensor<T>& grad_output, const ForwardOptions& options,
              ModelGradients<T>& grads) {
  const ModelConfig& c = model.config;
  const std::size_t batch = cache.input.dim(0);
  const std::size_t g = static_cast<std::size_t>(c.group_size);
  const std::size_t width = static_cast<std::size_t>(c.width);
  const std::size_t ph = static_cast<std::size_t>(c.patch_h);
  const std::size_t pw = static_cast<std::size_t>(c.patch_w);
  const std::size_t plane = ph * pw;
  expect_shape(grad_output.shape, {batch, g, ph, pw, 3}, "backward grad_output");

  Tensor<T> grad({batch * g, 3, ph, pw});
  for (std::size_t n = 0; n < batch * g; ++n) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const T* src = grad_output.ptr() + n * plane * 3 + ch;
      T* dst = grad.ptr() + (n * 3 + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p * 3];
    }
  }

  const std::size_t blocks = c.head_blocks.size();
  grad = k::conv3x3_backward(cache.head_inputs[blocks], model.head[blocks].kernel, grad,
                             grads.head[2 * blocks], grads.head[2 * blocks + 1]);
  const T head_omega = static_cast<T>(c.head_omega);
  for (std::size_t i = blocks; i-- > 0;) {
    Tensor<T> gpre = k::sine_backward(cache.head_pre[i], head_omega, grad);
    Tensor<T> gconv = k::pixel_unshuffle(gpre, c.head_blocks[i].upsample);
    grad = k::conv3x3_backward(cache.head_inputs[i], model.head[i].kernel, gconv,
                               grads.head[2 * i], grads.head[2 * i + 1]);
  }

  // Sum the per-frame copies back into one feature vector per centroid.
  Tensor<T> gx({batch, width});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < g; ++t) {
      const T* src = grad.ptr() + (b * g + t) * width;
      for (std::size_t j = 0; j < width; ++j) gx[b * width + j] += src[j];
    }
  }

  const T omega0 = static_cast<T>(c.omega0);
  for (std::size_t l = model.siren.size(); l-- > 0;) {
    const SirenLayer<T>& layer = model.siren[l];
    Tensor<T> gpre = k::sine_backward(cache.siren_pre[l], omega0, gx);
    Tensor<T> gw(layer.weight.shape());
    Tensor<T> gb(layer.bias.shape());
    gx = k::linear_backward(cache.siren_inputs[l], cache.siren_weights[l], gpre, gw, gb);
    // Straight-through: dW/dsurrogate = scale, dW/dscale = round(surrogate).
    const std::pair<const QuantizedLatent<T>*, const Tensor<T>*> parts[2] = {
        {&layer.weight, &gw}, {&layer.bias, &gb}};
    for (std::size_t p = 0; p < 2; ++p) {
      const QuantizedLatent<T>& q = *parts[p].first;
      const Tensor<T>& gd = *parts[p].second;
      Tensor<T>& gs = grads.surrogates[2 * l + p];
      T gscale = 0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const T base = options.quant == QuantMode::kRound
                           ? static_cast<T>(round_latent(q.surrogate[i]))
                           : q.surrogate[i];
        gs[i] += q.scale * gd[i];
        gscale += base * gd[i];
      }
      grads.scales[2 * l + p] += gscale;
    }
  }
}

template <typename T>
LossTerms<T> group_loss(const GroupModel<T>& model,
                        std::span<const ProbabilityModel<T>> prob_models,
                        std::span<const Centroid> centroids, const Tensor<T>& targets,
                        double lambda, std::span<const Tensor<T>> noise,
                        ModelGradients<T>* grads, const LossOptions& options) {
  ForwardCache<T> cache;
  const Tensor<T> out = forward(model, centroids, options.forward, grads ? &cache : nullptr);
  expect_shape(targets.shape, out.shape, "group_loss targets");

  LossTerms<T> terms;
  const T inv_n = T(1) / static_cast<T>(out.size());
  Tensor<T> grad_out;
  if (grads) grad_out = Tensor<T>(out.shape);
  T sse = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T d = out[i] - targets[i];
    sse += d * d;
    if (grads) grad_out[i] = T(2) * d * inv_n;
  }
  terms.mse = sse * inv_n;
  if (grads) backward(model, cache, grad_out, options.forward, *grads);

  if (!(options.skip_unweighted_entropy && lambda == 0.0)) {
    const std::vector<const QuantizedLatent<T>*> latents = model.latents();
    if (grads && lambda != 0.0) {
      std::vector<Tensor<T>> gs;
      for (const auto* q : latents) gs.emplace_back(q->shape());
      std::vector<std::array<T, ProbabilityModel<T>::kNumParams>> gp(latents.size());
      for (auto& a : gp) a.fill(T(0));
      terms.entropy_bits = entropy_loss<T>(latents, prob_models, noise, &gs, &gp);
      const T lam = static_cast<T>(lambda);
      for (std::size_t kx = 0; kx < latents.size(); ++kx) {
        for (std::size_t i = 0; i < gs[kx].size(); ++i) {
          grads->surrogates[kx][i] += lam * gs[kx][i];
        }
        for (std::size_t i = 0; i < gp[kx].size(); ++i) grads->prob[kx][i] += lam * gp[kx][i];
      }
    } else {
      terms.entropy_bits = entropy_loss<T>(latents, prob_models, noise);
    }
  }
  terms.total = terms.mse + static_cast<T>(lambda) * terms.entropy_bits;
  return terms;
}

#define NIRV_INSTANTIATE_MODEL(T)                                                       \
  template struct GroupModel<T>;                                                        \
  template struct ModelGradients<T>;                                                    \
  template GroupModel<T> init_group_model<T>(const ModelConfig&, std::uint64_t);        \
  template Tensor<T> forward(const GroupModel<T>&, std::span<const Centroid>,           \
                             const ForwardOptions&, ForwardCache<T>*);                  \
  template void backward(const GroupModel<T>&, const ForwardCache<T>&,                  \
                         const Tensor<T>&, const ForwardOptions&, ModelGradients<T>&);  \
  template LossTerms<T> group_loss(const GroupModel<T>&,                                \
                                   std::span<const ProbabilityModel<T>>,                \
                                   std::span<const Centroid>, const Tensor<T>&, double, \
                                   std::span<const Tensor<T>>, ModelGradients<T>*,      \
                                   const LossOptions&);

NIRV_INSTANTIATE_MODEL(float)
NIRV_INSTANTIATE_MODEL(double)

template GroupModel<double> GroupModel<float>::cast<double>() const;
template GroupModel<float> GroupModel<double>::cast<float>() const;
template GroupModel<float> GroupModel<float>::cast<float>() const;
template GroupModel<double> GroupModel<double>::cast<double>() const;

#undef NIRV_INSTANTIATE_MODEL

}  // namespace nirv
