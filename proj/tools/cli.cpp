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


#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nirv/error.hpp"
#include "nirv/file_util.hpp"
#include "nirv/pipeline.hpp"
#include "nirv/stream_codec.hpp"
#include "nirv/video_io.hpp"

namespace nirv::cli {

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kFileSizeMismatch:
      return kIoError;
    case ErrorCode::kBadMagic:
    case ErrorCode::kCorruptStream:
    case ErrorCode::kUnsupportedVersion:
      return kFormat;
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kNonDivisibleResolution:
    case ErrorCode::kTooFewFrames:
      return kUsage;
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kEmptyTensor:
    case ErrorCode::kSymbolOutOfRange:
    case ErrorCode::kNonFiniteLoss:
      return kNumeric;
  }
  return kNumeric;
}

// Flags shared by encode and bench. Values set on the command line or in a
// config file override the preset.
struct TrainFlags {
  std::string preset = "full";
  int patch = 32;
  int group = 3;
  int iters_first = 16000;
  int iters = 2000;
  double lambda = 1e-4;
  double lr = 5e-4;
  double lr_first = 5e-4;
  double lr_scale = 1e-4;
  double lr_prob = 1e-4;
  int mlp_width = 512;
  int mlp_layers = 5;
  int chunks = 1;
  int workers = 1;
  int minibatch = 0;
  std::uint64_t seed = 0;

  std::vector<CLI::Option*> options;

  void add(CLI::App* app) {
    auto keep = [this](CLI::Option* o) { options.push_back(o); };
    app->add_option("--preset", preset, "Starting configuration. full: 5x512 MLP, 32x32 patches, T=16000, "
                   "T_r=2000, lambda 1e-4, lr 5e-4. tiny: 4x128 MLP, 16x16 patches, T=2000, "
                   "T_r=500, lambda 1e-6, lr-first 5e-2 (head 5e-3)")
        ->check(CLI::IsMember({"full", "tiny"}))
        ->capture_default_str();
    keep(app->add_option("--patch-size", patch, "Square patch size")->capture_default_str());
    keep(app->add_option("--group-size", group, "Frames per group")->capture_default_str());
    keep(app->add_option("--iters-first", iters_first, "Iterations for a chunk's first group")
             ->capture_default_str());
    keep(app->add_option("--iters", iters, "Iterations for later groups")->capture_default_str());
    keep(app->add_option("--lambda-entropy", lambda, "Rate term weight")->capture_default_str());
    keep(app->add_option("--lr", lr, "Latent and head learning rate for warm-started groups")
             ->capture_default_str());
    keep(app->add_option("--lr-first", lr_first,
                         "Latent and head learning rate for groups trained from scratch")
             ->capture_default_str());
    keep(app->add_option("--lr-scale", lr_scale, "Learning rate for latent scales")
             ->capture_default_str());
    keep(app->add_option("--lr-prob", lr_prob, "Learning rate for probability models")
             ->capture_default_str());
    keep(app->add_option("--mlp-width", mlp_width, "Sine MLP width")->capture_default_str());
    keep(app->add_option("--mlp-layers", mlp_layers, "Sine MLP depth")->capture_default_str());
    keep(app->add_option("--chunks", chunks, "Independently coded chunks")->capture_default_str());
    keep(app->add_option("--workers", workers, "Encoder threads")->capture_default_str());
    keep(app->add_option("--minibatch", minibatch, "Patches per step, 0 for all")
             ->capture_default_str());
    keep(app->add_option("--seed", seed, "Random seed")->capture_default_str());
  }

  bool given(const char* name) const {
    for (const CLI::Option* o : options) {
      if (o->check_lname(name)) return o->count() > 0;
    }
    return false;
  }

  EncodeConfig build() const {
    EncodeConfig c = preset == "tiny" ? tiny_encode_config() : EncodeConfig{};
    if (preset == "full") c.model = default_model_config();
    if (given("mlp-width")) c.model.width = mlp_width;
    if (given("mlp-layers")) c.model.num_siren_layers = mlp_layers;
    if (given("group-size")) c.model.group_size = group;
    if (given("patch-size")) c.model.patch_h = c.model.patch_w = patch;
    if (given("patch-size") || given("mlp-width")) {
      c.model.head_blocks = default_head_blocks(c.model.width, c.model.patch_h, c.model.head_base);
    }
    if (given("iters-first")) c.iterations_first = iters_first;
    if (given("iters")) c.iterations_rest = iters;
    if (given("lambda-entropy")) c.lambda = lambda;
    if (given("lr")) c.lr.latent = c.lr.head = lr;
    if (given("lr-first")) c.lr_first.latent = c.lr_first.head = lr_first;
    if (given("lr-scale")) c.lr.scale = c.lr_first.scale = lr_scale;
    if (given("lr-prob")) c.lr.prob = c.lr_first.prob = lr_prob;
    if (given("chunks")) c.chunks = chunks;
    if (given("workers")) c.workers = workers;
    if (given("minibatch")) c.minibatch = minibatch;
    if (given("seed")) c.seed = seed;
    return c;
  }
};

std::string format_double(double v) {
  std::ostringstream os;
  if (v >= kPsnrInfinity) return "inf";
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

struct EncodeArgs {
  std::string input, output, report;
  int width = 0, height = 0, frames = 0;
  bool dry_run = false;
  TrainFlags train;
};

std::string describe(const EncodeConfig& c) {
  nlohmann::json j = nlohmann::json::parse(serialize_metadata(
      {c.model, c.lambda, c.iterations_first, c.iterations_rest, c.seed, ""}));
  j.erase("head_compressor");
  auto rates = [](const LearningRates& r) {
    return nlohmann::json{{"latent", r.latent}, {"scale", r.scale}, {"prob", r.prob},
                          {"head", r.head}};
  };
  j["lr"] = rates(c.lr);
  j["lr_first"] = rates(c.lr_first);
  j["chunks"] = c.chunks;
  j["workers"] = c.workers;
  j["minibatch"] = c.minibatch;
  return j.dump();
}

int cmd_encode(const EncodeArgs& a) {
  const EncodeConfig config = a.train.build();
  config.model.validate();
  check(a.width > 0 && a.height > 0 && a.frames > 0, ErrorCode::kInvalidConfig,
        "--width, --height and --frames must be positive");
  config.validate(group_count(a.frames, config.model.group_size));
  patch_centroids(a.width, a.height, config.model.patch_h, config.model.patch_w);
  if (a.dry_run) {
    std::cout << describe(config) << '\n';
    return kOk;
  }

  const Video video = load_raw_video(a.input, a.width, a.height, a.frames);
  const EncodeResult result = encode_video(video, config);
  write_file_atomic(a.output, result.bitstream);
  if (!a.report.empty()) write_text_atomic(a.report, result.report.to_csv());
  std::cout << "psnr_db=" << format_double(result.report.psnr_db)
            << " bpp=" << format_double(result.report.bpp)
            << " bytes=" << result.report.file_bytes
            << " seconds=" << format_double(result.report.seconds) << '\n';
  return kOk;
}

struct DecodeArgs {
  std::string input, output, reference;
  int chunk = -1;
};

int cmd_decode(const DecodeArgs& a) {
  const BitstreamReader reader = BitstreamReader::open(a.input);
  std::optional<std::size_t> chunk;
  if (a.chunk >= 0) chunk = static_cast<std::size_t>(a.chunk);
  const DecodeResult decoded = decode_video(reader, chunk);
  write_raw_video(decoded.video, a.output);
  std::cout << "frames=" << decoded.video.num_frames() << " first_frame=" << decoded.first_frame;
  if (!a.reference.empty()) {
    const BitstreamHeader& h = reader.header();
    const Video ref = load_raw_video(a.reference, h.width, h.height, static_cast<int>(h.frames));
    Video part(h.width, h.height, 0);
    const auto begin = ref.pixels.begin() + decoded.first_frame * ref.frame_size();
    part.pixels.assign(begin, begin + decoded.video.pixels.size());
    std::cout << " psnr_db=" << format_double(psnr(part, decoded.video));
  }
  std::cout << '\n';
  return kOk;
}

int cmd_info(const std::string& input) {
  const BitstreamReader reader = BitstreamReader::open(input);
  const BitstreamHeader& h = reader.header();
  std::cout << "version " << h.version << '\n'
            << "frames " << h.frames << '\n'
            << "height " << h.height << '\n'
            << "width " << h.width << '\n'
            << "patch " << int(h.patch_h) << 'x' << int(h.patch_w) << '\n'
            << "group_size " << int(h.group_size) << '\n'
            << "groups " << h.total_groups() << '\n'
            << "metadata " << std::string(h.metadata.begin(), h.metadata.end()) << '\n'
            << "header_bytes " << reader.header_size() << '\n';
  std::size_t payload_total = 0;
  for (std::size_t c = 0; c < h.chunks.size(); ++c) {
    const ChunkEntry& e = h.chunks[c];
    std::cout << "chunk " << c << " first_group " << e.first_group << " groups " << e.group_count
              << " offset " << e.offset << '\n';
    const std::vector<std::size_t> sizes = reader.chunk_payload_sizes(c);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      std::cout << "  group " << e.first_group + i << " bytes " << sizes[i] << '\n';
      payload_total += sizes[i];
    }
  }
  std::cout << "payload_bytes " << payload_total << '\n'
            << "file_bytes " << reader.file_size() << '\n'
            << "bpp " << format_double(bpp(reader.file_size(), h.frames, h.height, h.width))
            << '\n';
  return kOk;
}

struct BenchArgs {
  std::string output;
  std::vector<std::string> videos = {"static", "translating", "noise"};
  std::vector<double> lambdas;
  std::vector<int> patch_sizes, group_sizes, iters_list;
  int size = 64;
  int frames = 12;
  double motion = 1.0;
  double noise = 0.05;
  TrainFlags train;
};

int cmd_bench(BenchArgs a) {
  const EncodeConfig base = a.train.build();
  if (a.lambdas.empty()) a.lambdas = {base.lambda};
  if (a.patch_sizes.empty()) a.patch_sizes = {base.model.patch_h};
  if (a.group_sizes.empty()) a.group_sizes = {base.model.group_size};
  if (a.iters_list.empty()) a.iters_list = {base.iterations_rest};
  check(a.size > 0 && a.frames > 0 && a.motion >= 0.0 && a.noise >= 0.0,
        ErrorCode::kInvalidConfig, "synthetic video parameters must be positive");

  // Validate the whole sweep before any training starts.
  std::vector<EncodeConfig> configs;
  for (int patch : a.patch_sizes) {
    for (int group : a.group_sizes) {
      for (int iters : a.iters_list) {
        for (double lambda : a.lambdas) {
          EncodeConfig c = base;
          c.model.patch_h = c.model.patch_w = patch;
          c.model.group_size = group;
          c.model.head_blocks = default_head_blocks(c.model.width, patch, c.model.head_base);
          c.iterations_rest = iters;
          c.lambda = lambda;
          c.validate(group_count(a.frames, group));
          patch_centroids(a.size, a.size, patch, patch);
          configs.push_back(c);
        }
      }
    }
  }

  std::ostringstream csv;
  csv.precision(10);
  csv << "video,lambda,patch,group,iters_first,iters,psnr_db,bpp,bytes,seconds\n";
  for (const std::string& kind : a.videos) {
    SyntheticParams params;
    params.width = params.height = a.size;
    params.frames = a.frames;
    params.seed = base.seed;
    params.velocity_x = a.motion;
    params.velocity_y = a.motion / 2.0;
    params.noise = a.noise;
    Video video;
    if (kind == "static") {
      video = synthetic_static(params);
    } else if (kind == "translating") {
      video = synthetic_translating(params);
    } else if (kind == "noise") {
      video = synthetic_noise_modulated(params);
    } else {
      fail(ErrorCode::kInvalidConfig, "unknown synthetic video " + kind);
    }
    for (const EncodeConfig& c : configs) {
      const EncodeResult r = encode_video(video, c);
      csv << kind << ',' << c.lambda << ',' << c.model.patch_h << ',' << c.model.group_size << ','
          << c.iterations_first << ',' << c.iterations_rest << ',' << r.report.psnr_db << ','
          << r.report.bpp << ',' << r.report.file_bytes << ',' << r.report.seconds << '\n';
    }
  }
  if (a.output.empty()) {
    std::cout << csv.str();
  } else {
    write_text_atomic(a.output, csv.str());
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Neural video codec: encode, decode, inspect and benchmark"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file; keys go under [encode] or [bench]");

  EncodeArgs enc;
  CLI::App* encode = app.add_subcommand("encode", "Encode raw RGB24 video");
  encode->fallthrough();
  encode->add_option("-i,--input", enc.input, "Raw RGB24 input")->required();
  encode->add_option("-o,--output", enc.output, "Bitstream output")->required();
  encode->add_option("--width", enc.width, "Frame width")->required();
  encode->add_option("--height", enc.height, "Frame height")->required();
  encode->add_option("--frames", enc.frames, "Frame count")->required();
  encode->add_option("--report", enc.report, "CSV report path");
  encode->add_flag("--dry-run", enc.dry_run, "Validate and print the resolved configuration");
  enc.train.add(encode);

  DecodeArgs dec;
  CLI::App* decode = app.add_subcommand("decode", "Decode a bitstream to raw RGB24");
  decode->add_option("-i,--input", dec.input, "Bitstream input")->required();
  decode->add_option("-o,--output", dec.output, "Raw RGB24 output")->required();
  decode->add_option("--psnr-against", dec.reference, "Reference raw video for PSNR");
  decode->add_option("--chunk", dec.chunk, "Decode only this chunk");

  std::string info_input;
  CLI::App* info = app.add_subcommand("info", "Print container layout");
  info->add_option("-i,--input", info_input, "Bitstream input")->required();

  BenchArgs bench;
  bench.train.preset = "tiny";
  CLI::App* bench_cmd = app.add_subcommand("bench", "Sweep settings on synthetic videos");
  bench_cmd->fallthrough();
  bench_cmd->add_option("-o,--output", bench.output, "CSV output (stdout if omitted)");
  bench_cmd->add_option("--videos", bench.videos, "static, translating, noise")
      ->capture_default_str();
  bench_cmd->add_option("--lambdas", bench.lambdas, "Rate weights to sweep");
  bench_cmd->add_option("--patch-sizes", bench.patch_sizes, "Patch sizes to sweep");
  bench_cmd->add_option("--group-sizes", bench.group_sizes, "Group sizes to sweep");
  bench_cmd->add_option("--iters-list", bench.iters_list, "Later-group iterations to sweep");
  bench_cmd->add_option("--size", bench.size, "Synthetic frame size")->capture_default_str();
  bench_cmd->add_option("--frames", bench.frames, "Synthetic frame count")->capture_default_str();
  bench_cmd->add_option("--motion", bench.motion, "Translation in pixels per frame")
      ->capture_default_str();
  bench_cmd->add_option("--noise", bench.noise, "Brightness noise amplitude")
      ->capture_default_str();
  bench.train.add(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*encode) return cmd_encode(enc);
    if (*decode) return cmd_decode(dec);
    if (*info) return cmd_info(info_input);
    if (*bench_cmd) return cmd_bench(bench);
  } catch (const CodecError& e) {
    std::cerr << "nirv: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "nirv: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}

}  // namespace nirv::cli
