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


#include "nirv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "nirv/error.hpp"

namespace nirv {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// splitmix64 finalizer; decorrelates per-chunk seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr const char* kHeadCompressor = "xz-lzma2-float32-delta";

}  // namespace

// --- configuration -----------------------------------------------------------

void EncodeConfig::validate(int num_groups) const {
  model.validate();
  auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidConfig, what); };
  if (iterations_first < 1 || iterations_rest < 1) bad("iteration counts must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda must be finite and >= 0");
  for (const LearningRates& r : {lr, lr_first}) {
    if (!(r.latent > 0) || !(r.scale > 0) || !(r.prob > 0) || !(r.head > 0)) {
      bad("learning rates must be positive");
    }
  }
  if (chunks < 1 || chunks > std::max(num_groups, 1)) {
    bad("chunk count must be in [1, " + std::to_string(num_groups) + "]");
  }
  if (workers < 1) bad("need at least one worker");
  if (minibatch < 0) bad("minibatch must be >= 0");
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.num_siren_layers = 4;
  c.width = 128;
  c.patch_h = c.patch_w = 16;
  c.group_size = 3;
  c.head_base = 8;
  c.head_blocks = default_head_blocks(c.width, c.patch_h, c.head_base);
  return c;
}

EncodeConfig tiny_encode_config() {
  EncodeConfig e;
  e.model = tiny_model_config();
  e.iterations_first = 2000;
  e.iterations_rest = 500;
  e.lambda = 1e-6;
  e.lr_first.latent = 5e-2;
  e.lr_first.head = 5e-3;
  return e;
}

// --- report -------------------------------------------------------------------

std::string EncodeReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "index,psnr_db,bytes,mse,entropy_bits,motion_mse,seconds\n";
  for (const GroupStats& g : groups) {
    os << g.index << ',' << g.psnr_db << ',' << g.payload_bytes << ',' << g.mse << ','
       << g.entropy_bits << ',' << g.motion_mse << ',' << g.seconds << '\n';
  }
  double entropy = 0.0, mse_sum = 0.0;
  for (const GroupStats& g : groups) {
    entropy += g.entropy_bits;
    mse_sum += g.mse;
  }
  os << "total," << psnr_db << ',' << file_bytes << ','
     << (groups.empty() ? 0.0 : mse_sum / groups.size()) << ',' << entropy << ','
     << motion_mean << ',' << seconds << '\n';
  os << "# bpp," << bpp << '\n';
  return os.str();
}

// --- training -----------------------------------------------------------------

TrainState fresh_train_state(const ModelConfig& config, std::uint64_t seed) {
  TrainState s{init_group_model<float>(config, seed), {}, Rng(mix_seed(seed, 0xC0DE))};
  const std::size_t n = s.model.latents().size();
  s.prob.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.prob.emplace_back(s.rng);
  return s;
}

TrainStats train_group(TrainState& state, const FrameGroup& group, const PatchGrid& grid,
                       int iterations, double lambda, const LearningRates& lr,
                       int minibatch) {
  GroupModel<float>& model = state.model;
  const ModelConfig& c = model.config;
  check(group.group_size == c.group_size && group.patch_h == c.patch_h &&
            group.patch_w == c.patch_w && group.num_patches() == grid.size(),
        ErrorCode::kShapeMismatch, "frame group does not match the model config");
  check(iterations >= 0, ErrorCode::kInvalidConfig, "iterations must be >= 0");

  const std::size_t patches = static_cast<std::size_t>(grid.size());
  const std::size_t volume = group.volume_size();
  const std::size_t batch =
      minibatch > 0 ? std::min<std::size_t>(minibatch, patches) : patches;
  const Shape out_shape = {batch, static_cast<std::size_t>(c.group_size),
                           static_cast<std::size_t>(c.patch_h),
                           static_cast<std::size_t>(c.patch_w), 3};

  std::vector<std::size_t> order(patches);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Centroid> centroids(batch);
  Tensor<float> targets(out_shape);
  auto select = [&]() {
    if (batch < patches) {
      std::shuffle(order.begin(), order.end(), state.rng);
    }
    for (std::size_t b = 0; b < batch; ++b) {
      centroids[b] = grid.centroids[order[b]];
      std::copy_n(group.volumes.data() + order[b] * volume, volume,
                  targets.ptr() + b * volume);
    }
  };
  select();

  auto latents = model.latents();
  auto head = model.head_tensors();
  std::vector<AdamState<float>> surrogate_opt(latents.size()), head_opt(head.size()),
      prob_opt(latents.size());
  AdamState<float> scale_opt;

  auto noise_for = [&]() {
    std::vector<Tensor<float>> noise;
    noise.reserve(latents.size());
    for (const auto* q : latents) noise.push_back(uniform_noise<float>(q->shape(), state.rng));
    return noise;
  };

  LossOptions options;
  options.skip_unweighted_entropy = true;
  TrainStats stats;
  {
    const auto noise = noise_for();
    const LossTerms<float> t =
        group_loss<float>(model, state.prob, centroids, targets, lambda, noise, nullptr);
    stats.initial_mse = t.mse;
    stats.final_mse = t.mse;
    stats.final_entropy_bits = t.entropy_bits;
    stats.final_total = t.total;
  }

  ModelGradients<float> grads = ModelGradients<float>::zeros_like(model);
  std::vector<float> scales(latents.size()), scale_grads(latents.size());
  for (int it = 0; it < iterations; ++it) {
    if (batch < patches) select();
    grads.zero();
    const auto noise = noise_for();
    const LossTerms<float> t =
        group_loss<float>(model, state.prob, centroids, targets, lambda, noise, &grads, options);
    if (!std::isfinite(t.total)) {
      fail(ErrorCode::kNonFiniteLoss, "loss became non-finite at iteration " +
                                          std::to_string(it) + " of group " +
                                          std::to_string(group.index));
    }
    stats.final_mse = t.mse;
    stats.final_entropy_bits = t.entropy_bits;
    stats.final_total = t.total;

    for (std::size_t k = 0; k < latents.size(); ++k) {
      adam_step<float>(latents[k]->surrogate.span(), grads.surrogates[k].span(),
                       surrogate_opt[k], lr.latent);
      scales[k] = latents[k]->scale;
      scale_grads[k] = grads.scales[k];
    }
    adam_step<float>(scales, scale_grads, scale_opt, lr.scale);
    for (std::size_t k = 0; k < latents.size(); ++k) latents[k]->scale = scales[k];
    for (std::size_t k = 0; k < head.size(); ++k) {
      adam_step<float>(head[k]->span(), grads.head[k].span(), head_opt[k], lr.head);
    }
    if (lambda > 0.0) {
      for (std::size_t k = 0; k < latents.size(); ++k) {
        adam_step<float>(state.prob[k].params(), grads.prob[k], prob_opt[k], lr.prob);
      }
    }
  }
  return stats;
}

// --- reconstruction -------------------------------------------------------------

GroupModel<float> model_from_weights(const ModelConfig& config, const GroupWeights& weights) {
  GroupModel<float> model = init_group_model<float>(config, 0);
  auto latents = model.latents();
  check(weights.latents.size() == latents.size() && weights.scales.size() == latents.size(),
        ErrorCode::kCorruptStream, "latent tensor count does not match the model");
  for (std::size_t k = 0; k < latents.size(); ++k) {
    check(weights.latents[k].size() == latents[k]->size(), ErrorCode::kCorruptStream,
          "latent tensor size does not match the model");
    latents[k]->bind(weights.latents[k]);
    latents[k]->scale = weights.scales[k];
  }
  model.set_head_values(weights.head);
  return model;
}

Video render_group(const GroupModel<float>& model, const PatchGrid& grid, int width,
                   int height) {
  const Tensor<float> out = forward(model, std::span<const Centroid>(grid.centroids));
  return assemble_frames(out.span(), grid, width, height, model.config.group_size);
}

// --- metadata ---------------------------------------------------------------

std::vector<std::uint8_t> serialize_metadata(const StreamMetadata& meta) {
  const ModelConfig& m = meta.model;
  nlohmann::json blocks = nlohmann::json::array();
  for (const HeadBlock& b : m.head_blocks) blocks.push_back({b.upsample, b.channels});
  const nlohmann::json j = {
      {"model",
       {{"num_siren_layers", m.num_siren_layers},
        {"width", m.width},
        {"omega0", m.omega0},
        {"patch_h", m.patch_h},
        {"patch_w", m.patch_w},
        {"group_size", m.group_size},
        {"positional_base", m.positional_base},
        {"head_base", m.head_base},
        {"head_blocks", blocks},
        {"head_omega", m.head_omega},
        {"head_init_gain", m.head_init_gain},
        {"init_latent_levels", m.init_latent_levels}}},
      {"lambda", meta.lambda},
      {"iterations_first", meta.iterations_first},
      {"iterations_rest", meta.iterations_rest},
      {"seed", meta.seed},
      {"head_compressor", meta.head_compressor}};
  const std::string s = j.dump();
  return {s.begin(), s.end()};
}

StreamMetadata parse_metadata(std::span<const std::uint8_t> bytes) {
  StreamMetadata meta;
  try {
    const nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end());
    const nlohmann::json& m = j.at("model");
    ModelConfig& c = meta.model;
    c.num_siren_layers = m.at("num_siren_layers").get<int>();
    c.width = m.at("width").get<int>();
    c.omega0 = m.at("omega0").get<double>();
    c.patch_h = m.at("patch_h").get<int>();
    c.patch_w = m.at("patch_w").get<int>();
    c.group_size = m.at("group_size").get<int>();
    c.positional_base = m.at("positional_base").get<double>();
    c.head_base = m.at("head_base").get<int>();
    c.head_blocks.clear();
    for (const auto& b : m.at("head_blocks")) {
      c.head_blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
    }
    c.head_omega = m.at("head_omega").get<double>();
    c.head_init_gain = m.at("head_init_gain").get<double>();
    c.init_latent_levels = m.at("init_latent_levels").get<double>();
    meta.lambda = j.at("lambda").get<double>();
    meta.iterations_first = j.at("iterations_first").get<int>();
    meta.iterations_rest = j.at("iterations_rest").get<int>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.head_compressor = j.at("head_compressor").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptStream, std::string("metadata: ") + e.what());
  }
  try {
    meta.model.validate();
  } catch (const CodecError& e) {
    fail(ErrorCode::kCorruptStream, std::string("metadata: ") + e.what());
  }
  if (meta.head_compressor != kHeadCompressor) {
    fail(ErrorCode::kUnsupportedVersion, "unknown head compressor " + meta.head_compressor);
  }
  return meta;
}

// --- encoding -----------------------------------------------------------------

namespace {

struct ChunkOutput {
  std::vector<GroupPayload> payloads;
  std::vector<GroupWeights> weights;
  std::vector<GroupStats> stats;
  std::vector<Video> renders;  // per group, padding frames included
};

GroupWeights snapshot(const GroupModel<float>& model) {
  GroupWeights w;
  for (const auto* q : model.latents()) {
    w.latents.push_back(q->latent());
    w.scales.push_back(q->scale);
  }
  w.head = model.head_values();
  return w;
}

double frames_mse(const Video& a, int a_first, const Video& b, int b_first, int count) {
  const std::size_t fs = a.frame_size();
  return mse(std::span<const float>(a.pixels).subspan(a_first * fs, count * fs),
             std::span<const float>(b.pixels).subspan(b_first * fs, count * fs));
}

ChunkOutput encode_chunk(const Video& video, const PatchGrid& grid, const EncodeConfig& config,
                         int first_group, int group_count, const MotionProxy& motion) {
  ChunkOutput out;
  const ModelConfig& mc = config.model;
  const int g_size = mc.group_size;
  const std::uint64_t chunk_seed = mix_seed(config.seed, static_cast<std::uint64_t>(first_group));
  TrainState state = fresh_train_state(mc, chunk_seed);
  GroupWeights prev;

  for (int g = first_group; g < first_group + group_count; ++g) {
    const auto start = Clock::now();
    const FrameGroup group = make_group(video, grid, g_size, g);
    const bool head_of_chunk = g == first_group;
    if (!head_of_chunk && !config.warm_start) {
      // Fresh weights, same optimizer-side rng stream.
      state.model = init_group_model<float>(mc, mix_seed(chunk_seed, static_cast<std::uint64_t>(g)));
    }
    const int iterations = head_of_chunk ? config.iterations_first : config.iterations_rest;
    const bool fresh = head_of_chunk || !config.warm_start;
    const TrainStats ts = train_group(state, group, grid, iterations, config.lambda,
                                      fresh ? config.lr_first : config.lr, config.minibatch);

    GroupWeights cur = snapshot(state.model);
    GroupPayload payload;
    payload.group_index = static_cast<std::uint32_t>(g);
    for (std::size_t k = 0; k < cur.latents.size(); ++k) {
      const std::vector<std::int32_t> symbols =
          head_of_chunk ? cur.latents[k] : residual(cur.latents[k], prev.latents[k]);
      payload.tensors.push_back(encode_tensor(symbols, cur.scales[k]));
    }
    payload.head_count = static_cast<std::uint32_t>(cur.head.size());
    if (head_of_chunk) {
      payload.head_coding = HeadCoding::kRawFloat32;
      ByteWriter w;
      for (float v : cur.head) w.f32(v);
      payload.head_bytes = w.take();
    } else {
      payload.head_coding = HeadCoding::kLzmaFloatDelta;
      std::vector<float> delta(cur.head.size());
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = cur.head[i] - prev.head[i];
      payload.head_bytes = compress_float_delta(delta);
      // Carry on from exactly what the decoder will rebuild.
      for (std::size_t i = 0; i < delta.size(); ++i) cur.head[i] = prev.head[i] + delta[i];
      state.model.set_head_values(cur.head);
    }

    const Video render = render_group(model_from_weights(mc, cur), grid, video.width, video.height);
    GroupStats s;
    s.index = g;
    s.psnr_db = psnr_from_mse(frames_mse(render, 0, video, group.first_frame, group.real_frames));
    s.payload_bytes = serialize_payload_body(payload).size() + 8;
    s.mse = ts.final_mse;
    s.entropy_bits = ts.final_entropy_bits;
    double msum = 0.0;
    int mcount = 0;
    for (int t = std::max(group.first_frame, 1); t < group.first_frame + group.real_frames; ++t) {
      msum += motion.pairs[t - 1];
      ++mcount;
    }
    s.motion_mse = mcount ? msum / mcount : 0.0;
    s.seconds = seconds_since(start);

    out.payloads.push_back(std::move(payload));
    out.weights.push_back(cur);
    out.stats.push_back(s);
    out.renders.push_back(render);
    prev = std::move(cur);
  }
  return out;
}

}  // namespace

EncodeResult encode_video(const Video& video, const EncodeConfig& config) {
  const auto start = Clock::now();
  const ModelConfig& mc = config.model;
  const int n = video.num_frames();
  check(n > 0, ErrorCode::kInvalidConfig, "video has no frames");
  const int groups = group_count(n, mc.group_size);
  config.validate(groups);
  check(video.width <= 0xFFFF && video.height <= 0xFFFF, ErrorCode::kInvalidConfig,
        "frame size exceeds the container limit");
  const PatchGrid grid = patch_centroids(video.width, video.height, mc.patch_h, mc.patch_w);
  const MotionProxy motion = n >= 2 ? motion_proxy(video) : MotionProxy{};

  // Contiguous chunks, sizes differing by at most one group.
  std::vector<std::pair<int, int>> spans;
  for (int c = 0, first = 0; c < config.chunks; ++c) {
    const int count = groups / config.chunks + (c < groups % config.chunks ? 1 : 0);
    spans.emplace_back(first, count);
    first += count;
  }

  std::vector<ChunkOutput> outputs(spans.size());
  std::vector<std::exception_ptr> errors(spans.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t c; (c = next.fetch_add(1)) < spans.size();) {
      try {
        outputs[c] = encode_chunk(video, grid, config, spans[c].first, spans[c].second, motion);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(config.workers, static_cast<int>(spans.size()));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EncodeResult result;
  BitstreamHeader header;
  header.frames = static_cast<std::uint32_t>(n);
  header.height = static_cast<std::uint16_t>(video.height);
  header.width = static_cast<std::uint16_t>(video.width);
  header.patch_h = static_cast<std::uint8_t>(mc.patch_h);
  header.patch_w = static_cast<std::uint8_t>(mc.patch_w);
  header.group_size = static_cast<std::uint8_t>(mc.group_size);
  header.metadata = serialize_metadata({mc, config.lambda, config.iterations_first,
                                        config.iterations_rest, config.seed, kHeadCompressor});
  std::vector<std::vector<GroupPayload>> chunks;
  result.reconstruction = Video(video.width, video.height, 0);
  for (ChunkOutput& o : outputs) {
    chunks.push_back(std::move(o.payloads));
    for (std::size_t i = 0; i < o.stats.size(); ++i) {
      const int frames = std::min(mc.group_size, n - o.stats[i].index * mc.group_size);
      const auto& px = o.renders[i].pixels;
      result.reconstruction.pixels.insert(result.reconstruction.pixels.end(), px.begin(),
                                          px.begin() + frames * video.frame_size());
      result.report.groups.push_back(o.stats[i]);
      result.weights.push_back(std::move(o.weights[i]));
    }
  }
  result.bitstream = serialize_container(header, chunks);

  EncodeReport& r = result.report;
  r.file_bytes = result.bitstream.size();
  r.bpp = bpp(r.file_bytes, n, video.height, video.width);
  r.psnr_db = psnr(video, result.reconstruction);
  r.motion_mean = motion.mean;
  r.seconds = seconds_since(start);
  return result;
}

// --- decoding -------------------------------------------------------------------

DecodeResult decode_video(const BitstreamReader& reader, std::optional<std::size_t> chunk) {
  const BitstreamHeader& h = reader.header();
  const StreamMetadata meta = parse_metadata(h.metadata);
  const ModelConfig& mc = meta.model;
  if (mc.patch_h != h.patch_h || mc.patch_w != h.patch_w || mc.group_size != h.group_size) {
    fail(ErrorCode::kCorruptStream, "metadata disagrees with the header geometry");
  }
  const PatchGrid grid = patch_centroids(h.width, h.height, mc.patch_h, mc.patch_w);
  const int n = static_cast<int>(h.frames);
  std::size_t begin = 0, end = h.chunks.size();
  if (chunk) {
    check(*chunk < h.chunks.size(), ErrorCode::kInvalidConfig, "chunk index out of range");
    begin = *chunk;
    end = *chunk + 1;
  }

  DecodeResult result;
  result.video = Video(h.width, h.height, 0);
  result.first_frame = begin < end ? static_cast<int>(h.chunks[begin].first_group) * mc.group_size : 0;
  const GroupModel<float> shape_model = init_group_model<float>(mc, 0);
  const auto shape_latents = shape_model.latents();
  const std::size_t head_count = shape_model.head_values().size();

  for (std::size_t c = begin; c < end; ++c) {
    const std::vector<GroupPayload> payloads = reader.chunk_payloads(c);
    GroupWeights prev;
    for (std::size_t i = 0; i < payloads.size(); ++i) {
      const GroupPayload& p = payloads[i];
      const bool head_of_chunk = i == 0;
      const std::uint32_t expected = h.chunks[c].first_group + static_cast<std::uint32_t>(i);
      check(p.group_index == expected, ErrorCode::kCorruptStream, "payload group index out of order");
      check(p.tensors.size() == shape_latents.size() && p.head_count == head_count,
            ErrorCode::kCorruptStream, "payload does not match the model configuration");
      GroupWeights cur;
      for (std::size_t k = 0; k < p.tensors.size(); ++k) {
        check(p.tensors[k].symbol_count == shape_latents[k]->size(), ErrorCode::kCorruptStream,
              "tensor payload has the wrong symbol count");
        std::vector<std::int32_t> symbols = decode_tensor(p.tensors[k]);
        cur.latents.push_back(head_of_chunk ? std::move(symbols)
                                            : accumulate(prev.latents[k], symbols));
        cur.scales.push_back(p.tensors[k].scale);
      }
      if (head_of_chunk) {
        check(p.head_coding == HeadCoding::kRawFloat32 && p.head_bytes.size() == 4 * head_count,
              ErrorCode::kCorruptStream, "chunk head must store raw head parameters");
        ByteReader r(p.head_bytes);
        for (std::size_t k = 0; k < head_count; ++k) cur.head.push_back(r.f32());
      } else {
        check(p.head_coding == HeadCoding::kLzmaFloatDelta, ErrorCode::kCorruptStream,
              "later groups must store head deltas");
        const std::vector<float> delta = decompress_float_delta(p.head_bytes, head_count);
        cur.head.resize(head_count);
        for (std::size_t k = 0; k < head_count; ++k) cur.head[k] = prev.head[k] + delta[k];
      }
      const Video render =
          render_group(model_from_weights(mc, cur), grid, h.width, h.height);
      const int frames = std::min(mc.group_size, n - static_cast<int>(expected) * mc.group_size);
      result.video.pixels.insert(result.video.pixels.end(), render.pixels.begin(),
                                 render.pixels.begin() + frames * render.frame_size());
      result.weights.push_back(cur);
      prev = std::move(cur);
    }
  }
  return result;
}

// --- metrics --------------------------------------------------------------------

double mse(std::span<const float> a, std::span<const float> b) {
  check(a.size() == b.size(), ErrorCode::kShapeMismatch, "mse: sizes differ");
  check(!a.empty(), ErrorCode::kEmptyTensor, "mse of empty data");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double m) {
  return m <= 0.0 ? kPsnrInfinity : 10.0 * std::log10(1.0 / m);
}

double psnr(const Video& reference, const Video& reconstruction) {
  if (reference.width != reconstruction.width || reference.height != reconstruction.height ||
      reference.pixels.size() != reconstruction.pixels.size()) {
    fail(ErrorCode::kShapeMismatch, "psnr: videos differ in shape");
  }
  return psnr_from_mse(mse(reference.pixels, reconstruction.pixels));
}

MotionProxy motion_proxy(const Video& video) {
  const int n = video.num_frames();
  if (n < 2) fail(ErrorCode::kTooFewFrames, "motion proxy needs at least two frames");
  MotionProxy m;
  for (int t = 0; t + 1 < n; ++t) m.pairs.push_back(mse(video.frame(t), video.frame(t + 1)));
  m.mean = std::accumulate(m.pairs.begin(), m.pairs.end(), 0.0) / m.pairs.size();
  return m;
}

// --- synthetic videos -------------------------------------------------------------

namespace {

struct Wave {
  double fx, fy, phase, amp;
};

std::array<std::vector<Wave>, 3> pattern(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5EED));
  std::uniform_real_distribution<double> freq(-2.0, 2.0), phase(0.0, 2.0 * M_PI),
      amp(0.05, 0.12);
  std::array<std::vector<Wave>, 3> waves;
  for (auto& ch : waves) {
    for (int k = 0; k < 3; ++k) ch.push_back({freq(rng), freq(rng), phase(rng), amp(rng)});
  }
  return waves;
}

void check_params(const SyntheticParams& s) {
  check(s.width > 0 && s.height > 0 && s.frames > 0, ErrorCode::kInvalidConfig,
        "synthetic video dimensions must be positive");
}

// Pattern sampled at continuous position (x, y) in pixels.
Video render_pattern(const SyntheticParams& s, const std::array<std::vector<Wave>, 3>& waves,
                     double vx, double vy, const std::vector<double>& gain) {
  Video v(s.width, s.height, s.frames);
  for (int t = 0; t < s.frames; ++t) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double u = (x - vx * t) / s.width, w = (y - vy * t) / s.height;
        for (int c = 0; c < 3; ++c) {
          double val = 0.5;
          for (const Wave& wv : waves[c]) {
            val += wv.amp * std::sin(2.0 * M_PI * (wv.fx * u + wv.fy * w) + wv.phase);
          }
          val = 0.5 + (val - 0.5) * gain[t];
          // Quantize like a decoded 8-bit source.
          v.at(t, y, x, c) = byte_to_pixel(pixel_to_byte(static_cast<float>(val)));
        }
      }
    }
  }
  return v;
}

}  // namespace

Video synthetic_static(const SyntheticParams& params) {
  check_params(params);
  return render_pattern(params, pattern(params.seed), 0.0, 0.0, std::vector<double>(params.frames, 1.0));
}

Video synthetic_translating(const SyntheticParams& params) {
  check_params(params);
  return render_pattern(params, pattern(params.seed), params.velocity_x, params.velocity_y,
                        std::vector<double>(params.frames, 1.0));
}

Video synthetic_noise_modulated(const SyntheticParams& params) {
  check_params(params);
  Rng rng(mix_seed(params.seed, 0x401CE));
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::vector<double> gain(params.frames);
  for (double& g : gain) g = 1.0 + params.noise * 10.0 * jitter(rng);
  return render_pattern(params, pattern(params.seed), 0.0, 0.0, gain);
}

}  // namespace nirv
