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

// Per-group network: a sine-activated MLP maps a patch centroid to a feature
// vector, which is copied once per frame of the group, offset by a frame
// positional encoding, reshaped to a small grid, and upsampled by
// conv3x3 + pixel-shuffle blocks into a G x H_p x W_p x 3 patch volume.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nirv/quant_entropy.hpp"
#include "nirv/tensor.hpp"
#include "nirv/video_io.hpp"

namespace nirv {

struct HeadBlock {
  int upsample = 2;  // pixel-shuffle factor
  int channels = 8;  // channels after the shuffle

  bool operator==(const HeadBlock&) const = default;
};

struct ModelConfig {
  int num_siren_layers = 5;
  int width = 512;
  double omega0 = 30.0;
  int patch_h = 32;
  int patch_w = 32;
  int group_size = 3;
  double positional_base = 1.25;
  // Head: the feature vector is reshaped to (width / base^2, base, base).
  int head_base = 4;
  std::vector<HeadBlock> head_blocks = {{4, 16}, {2, 8}};
  double head_omega = 1.0;
  double head_init_gain = 1.0;
  // Initial latent magnitude: scale = init bound / init_latent_levels.
  double init_latent_levels = 32.0;

  int feature_channels() const { return width / (head_base * head_base); }
  // Throws InvalidConfig when shapes are inconsistent.
  void validate() const;
  std::uint64_t mlp_parameter_count() const;
  std::uint64_t head_parameter_count() const;

  bool operator==(const ModelConfig&) const = default;
};

// Upsampling blocks for a square patch: factors multiply to patch / base
// (4s first, then 2s, then whatever remains), and channels halve per block
// starting from half the feature channels, never below 4.
std::vector<HeadBlock> default_head_blocks(int width, int patch, int head_base = 4);

// Full-size defaults (5 x 512 MLP, 32x32 patches, 3 frames per group).
ModelConfig default_model_config();

std::vector<double> positional_encode(int t, int d, double base);

template <typename T>
struct SirenLayer {
  QuantizedLatent<T> weight;  // [out, in]
  QuantizedLatent<T> bias;    // [out]
};

template <typename T>
struct ConvLayer {
  Tensor<T> kernel;  // [out, in, 3, 3]
  Tensor<T> bias;    // [out]
};

template <typename T>
struct GroupModel {
  ModelConfig config;
  std::vector<SirenLayer<T>> siren;
  std::vector<ConvLayer<T>> head;  // one per block, then the output conv

  // Bound latents in serialization order: w0, b0, w1, b1, ...
  std::vector<QuantizedLatent<T>*> latents();
  std::vector<const QuantizedLatent<T>*> latents() const;
  // Head tensors in serialization order: k0, b0, k1, b1, ...
  std::vector<Tensor<T>*> head_tensors();
  std::vector<const Tensor<T>*> head_tensors() const;

  std::vector<float> head_values() const;
  void set_head_values(std::span<const float> values);

  template <typename U>
  GroupModel<U> cast() const;
};

template <typename T>
GroupModel<T> init_group_model(const ModelConfig& config, std::uint64_t seed);

enum class QuantMode {
  kRound,     // W = scale * round(surrogate), straight-through gradient
  kIdentity,  // W = scale * surrogate; the straight-through Jacobian made exact
};

struct ForwardOptions {
  QuantMode quant = QuantMode::kRound;
  bool positional_encoding = true;
};

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  std::vector<Tensor<T>> siren_weights, siren_biases;  // decoded
  std::vector<Tensor<T>> siren_inputs, siren_pre;
  std::vector<Tensor<T>> head_inputs;  // input of each conv
  std::vector<Tensor<T>> head_pre;     // shuffled block output before the sine
};

// Returns [B, G, H_p, W_p, 3] raw (unclamped) patch volumes.
template <typename T>
Tensor<T> forward(const GroupModel<T>& model, std::span<const Centroid> centroids,
                  const ForwardOptions& options = {}, ForwardCache<T>* cache = nullptr);

template <typename T>
struct ModelGradients {
  std::vector<Tensor<T>> surrogates;  // aligned with latents()
  std::vector<T> scales;
  std::vector<Tensor<T>> head;  // aligned with head_tensors()
  std::vector<std::array<T, ProbabilityModel<T>::kNumParams>> prob;

  static ModelGradients zeros_like(const GroupModel<T>& model);
  void zero();
};

template <typename T>
void backward(const GroupModel<T>& model, const ForwardCache<T>& cache,
              const Tensor<T>& grad_output, const ForwardOptions& options,
              ModelGradients<T>& grads);

template <typename T>
struct LossTerms {
  T total = 0;
  T mse = 0;
  T entropy_bits = 0;
};

struct LossOptions {
  ForwardOptions forward;
  // Skip the rate term entirely when lambda is zero (training fast path).
  bool skip_unweighted_entropy = false;
};

// total = mean squared error + lambda * sum(-log2 p(surrogate + noise)).
// `noise` carries one tensor per bound latent.
template <typename T>
LossTerms<T> group_loss(const GroupModel<T>& model,
                        std::span<const ProbabilityModel<T>> prob_models,
                        std::span<const Centroid> centroids, const Tensor<T>& targets,
                        double lambda, std::span<const Tensor<T>> noise,
                        ModelGradients<T>* grads = nullptr,
                        const LossOptions& options = {});

}  // namespace nirv
