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


// Sequential group encoding with warm starts, chunk-parallel encoding,
// cumulative residual decoding, and quality/rate/motion metrics.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nirv/model.hpp"
#include "nirv/optim.hpp"
#include "nirv/quant_entropy.hpp"
#include "nirv/stream_codec.hpp"
#include "nirv/video_io.hpp"

namespace nirv {

struct LearningRates {
  double latent = 5e-4;
  double scale = 1e-4;
  double prob = 1e-4;
  double head = 5e-4;

  bool operator==(const LearningRates&) const = default;
};

struct EncodeConfig {
  ModelConfig model;
  int iterations_first = 16000;
  int iterations_rest = 2000;
  double lambda = 1e-4;
  LearningRates lr;        // warm-started groups
  LearningRates lr_first;  // groups trained from a fresh init
  int chunks = 1;
  int workers = 1;
  std::uint64_t seed = 0;
  int minibatch = 0;        // patches per step; 0 = all patches
  bool warm_start = true;   // false: every group starts from a fresh init

  // Throws InvalidConfig. num_groups bounds the chunk count.
  void validate(int num_groups) const;
};

// Small model for desk-scale runs on 64x64 video: 16x16 patches.
ModelConfig tiny_model_config();
EncodeConfig tiny_encode_config();

struct GroupStats {
  int index = 0;
  double psnr_db = 0.0;
  std::size_t payload_bytes = 0;
  double mse = 0.0;           // final training loss terms
  double entropy_bits = 0.0;
  double motion_mse = 0.0;    // mean MSE of consecutive frame pairs ending in the group
  double seconds = 0.0;
};

struct EncodeReport {
  std::vector<GroupStats> groups;
  double psnr_db = 0.0;
  double bpp = 0.0;
  double seconds = 0.0;
  std::size_t file_bytes = 0;
  double motion_mean = 0.0;

  std::string to_csv() const;
};

// Trainable state owned by one worker.
struct TrainState {
  GroupModel<float> model;
  std::vector<ProbabilityModel<float>> prob;
  Rng rng;
};

TrainState fresh_train_state(const ModelConfig& config, std::uint64_t seed);

struct TrainStats {
  double initial_mse = 0.0;
  double final_mse = 0.0;
  double final_entropy_bits = 0.0;
  double final_total = 0.0;
};

// Runs `iterations` Adam steps on one frame group. Optimizer moments start
// fresh on every call. Throws NonFiniteLoss.
TrainStats train_group(TrainState& state, const FrameGroup& group, const PatchGrid& grid,
                       int iterations, double lambda, const LearningRates& lr,
                       int minibatch = 0);

// Integer latents and shipped values of one group, as the decoder sees them.
struct GroupWeights {
  std::vector<std::vector<std::int32_t>> latents;  // aligned with GroupModel::latents()
  std::vector<float> scales;
  std::vector<float> head;
};

// Builds a float model carrying exactly the given weights.
GroupModel<float> model_from_weights(const ModelConfig& config, const GroupWeights& weights);

// Renders all frames of a group (padding included) in [0, 1].
Video render_group(const GroupModel<float>& model, const PatchGrid& grid, int width,
                   int height);

struct EncodeResult {
  std::vector<std::uint8_t> bitstream;
  EncodeReport report;
  Video reconstruction;                // what decode_video will return
  std::vector<GroupWeights> weights;   // per group, in order
};

// Encodes with config.chunks chunks on config.workers threads.
EncodeResult encode_video(const Video& video, const EncodeConfig& config);

struct DecodeResult {
  Video video;
  int first_frame = 0;
  std::vector<GroupWeights> weights;  // per decoded group
};

// Decodes every chunk, or only `chunk` when given.
DecodeResult decode_video(const BitstreamReader& reader,
                          std::optional<std::size_t> chunk = std::nullopt);

// Configuration stored in the container metadata block.
struct StreamMetadata {
  ModelConfig model;
  double lambda = 0.0;
  int iterations_first = 0;
  int iterations_rest = 0;
  std::uint64_t seed = 0;
  std::string head_compressor;
};

std::vector<std::uint8_t> serialize_metadata(const StreamMetadata& meta);
StreamMetadata parse_metadata(std::span<const std::uint8_t> bytes);

// --- metrics ----------------------------------------------------------------

inline constexpr double kPsnrInfinity = 1e9;  // sentinel for zero error

double mse(std::span<const float> a, std::span<const float> b);
double psnr_from_mse(double mse);
double psnr(const Video& reference, const Video& reconstruction);

struct MotionProxy {
  std::vector<double> pairs;  // MSE between frames t and t + 1
  double mean = 0.0;
};

MotionProxy motion_proxy(const Video& video);

// --- synthetic videos -------------------------------------------------------

struct SyntheticParams {
  int width = 64;
  int height = 64;
  int frames = 12;
  std::uint64_t seed = 0;
  double velocity_x = 1.0;  // pixels per frame
  double velocity_y = 0.5;
  double noise = 0.05;      // noise-modulated amplitude
};

// A smooth pattern built from a few low-frequency sinusoids per channel.
Video synthetic_static(const SyntheticParams& params);
Video synthetic_translating(const SyntheticParams& params);
// Static pattern whose brightness is modulated per frame by seeded noise.
Video synthetic_noise_modulated(const SyntheticParams& params);

}  // namespace nirv
