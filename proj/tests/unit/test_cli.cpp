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


#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "nirv/file_util.hpp"
#include "nirv/pipeline.hpp"
#include "nirv/stream_codec.hpp"
#include "nirv/video_io.hpp"

using namespace nirv;
namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<std::string> args) {
  std::vector<std::string> storage = {"nirv"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : storage) argv.push_back(s.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nirv_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

Video small_video(int frames) {
  SyntheticParams s;
  s.width = s.height = 16;
  s.frames = frames;
  return synthetic_translating(s);
}

// Small model flags shared by the encode tests.
const std::vector<std::string> kSmall = {"--preset",     "tiny", "--mlp-width", "64",
                                         "--mlp-layers", "2",    "--patch-size", "8",
                                         "--group-size", "2",    "--iters-first", "10",
                                         "--iters",      "3"};

int run_encode(const std::vector<std::string>& extra) {
  std::vector<std::string> storage = {"nirv", "encode"};
  storage.insert(storage.end(), extra.begin(), extra.end());
  std::vector<const char*> argv;
  for (const std::string& s : storage) argv.push_back(s.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Runs the CLI with std::cout captured.
std::string run_captured(const std::vector<std::string>& args, int* code) {
  std::vector<std::string> storage = {"nirv"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : storage) argv.push_back(s.c_str());
  std::ostringstream out;
  std::streambuf* old = std::cout.rdbuf(out.rdbuf());
  *code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return out.str();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}) == cli::kUsage);
  CHECK(run({"transcode"}) == cli::kUsage);
  CHECK(run({"encode", "-i", "x"}) == cli::kUsage);
  CHECK(run({"decode", "-i", "x", "-o", "y", "--chunk", "abc"}) == cli::kUsage);
  CHECK(run({"encode", "--help"}) == cli::kOk);
}

TEST_CASE("invalid settings are rejected before any output is written") {
  TempDir dir;
  write_raw_video(small_video(4), dir / "in.rgb");
  const std::vector<std::string> io = {"-i", dir / "in.rgb", "-o", dir / "out.nirv",
                                       "--width", "16", "--height", "16", "--frames", "4"};
  std::vector<std::string> bad = concat(io, kSmall);
  bad.insert(bad.end(), {"--patch-size", "5"});
  CHECK(run_encode(bad) == cli::kUsage);
  bad = concat(io, kSmall);
  bad.insert(bad.end(), {"--chunks", "3"});
  CHECK(run_encode(bad) == cli::kUsage);
  bad = concat(io, kSmall);
  bad.insert(bad.end(), {"--lambda-entropy", "-1"});
  CHECK(run_encode(bad) == cli::kUsage);
  bad = concat(io, kSmall);
  bad.insert(bad.end(), {"--iters", "0"});
  CHECK(run_encode(bad) == cli::kUsage);
  CHECK_FALSE(fs::exists(dir / "out.nirv"));
}

TEST_CASE("i/o and format errors") {
  TempDir dir;
  const std::vector<std::string> io = {"-i", dir / "missing.rgb", "-o", dir / "out.nirv",
                                       "--width", "16", "--height", "16", "--frames", "4"};
  CHECK(run_encode(concat(io, kSmall)) == cli::kIoError);
  write_raw_video(small_video(3), dir / "short.rgb");
  const std::vector<std::string> short_io = {"-i", dir / "short.rgb", "-o", dir / "out.nirv",
                                             "--width", "16", "--height", "16", "--frames", "4"};
  CHECK(run_encode(concat(short_io, kSmall)) == cli::kIoError);
  CHECK(run({"decode", "-i", dir / "missing.nirv", "-o", dir / "x.rgb"}) == cli::kIoError);
  CHECK(run({"decode", "-i", dir / "short.rgb", "-o", dir / "x.rgb"}) == cli::kFormat);
  CHECK(run({"info", "-i", dir / "short.rgb"}) == cli::kFormat);
  CHECK_FALSE(fs::exists(dir / "x.rgb"));
}

TEST_CASE("encode, info and decode round trip") {
  TempDir dir;
  const Video video = small_video(5);
  write_raw_video(video, dir / "in.rgb");
  const std::vector<std::string> io = {"-i", dir / "in.rgb", "-o", dir / "out.nirv",
                                       "--width", "16", "--height", "16", "--frames", "5",
                                       "--report", dir / "report.csv", "--chunks", "2"};
  REQUIRE(run_encode(concat(io, kSmall)) == cli::kOk);
  CHECK(run({"info", "-i", dir / "out.nirv"}) == cli::kOk);
  REQUIRE(run({"decode", "-i", dir / "out.nirv", "-o", dir / "dec.rgb", "--psnr-against",
               dir / "in.rgb"}) == cli::kOk);
  REQUIRE(run({"decode", "-i", dir / "out.nirv", "-o", dir / "dec1.rgb", "--chunk", "1"}) ==
          cli::kOk);
  CHECK(run({"decode", "-i", dir / "out.nirv", "-o", dir / "dec9.rgb", "--chunk", "9"}) ==
        cli::kUsage);

  // The CLI encodes exactly what the library encodes for the same settings.
  EncodeConfig c = tiny_encode_config();
  c.model.width = 64;
  c.model.num_siren_layers = 2;
  c.model.patch_h = c.model.patch_w = 8;
  c.model.group_size = 2;
  c.model.head_blocks = default_head_blocks(64, 8, c.model.head_base);
  c.iterations_first = 10;
  c.iterations_rest = 3;
  c.chunks = 2;
  const EncodeResult r = encode_video(video, c);
  CHECK(read_file(dir / "out.nirv") == r.bitstream);

  const Video decoded = load_raw_video(dir / "dec.rgb", 16, 16, 5);
  REQUIRE(decoded.pixels.size() == r.reconstruction.pixels.size());
  for (std::size_t i = 0; i < decoded.pixels.size(); ++i) {
    REQUIRE(decoded.pixels[i] == byte_to_pixel(pixel_to_byte(r.reconstruction.pixels[i])));
  }
  const Video tail = load_raw_video(dir / "dec1.rgb", 16, 16, 1);
  const BitstreamReader reader(r.bitstream);
  CHECK(reader.header().chunks[1].first_group == 2);
  for (std::size_t i = 0; i < tail.pixels.size(); ++i) {
    REQUIRE(tail.pixels[i] == decoded.pixels[i + 4 * video.frame_size()]);
  }

  std::ifstream report(dir / "report.csv");
  std::string line;
  int rows = 0;
  while (std::getline(report, line)) ++rows;
  CHECK(rows == 1 + 3 + 2);
}

TEST_CASE("config file sits between flags and defaults") {
  TempDir dir;
  write_raw_video(small_video(4), dir / "in.rgb");
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "[encode]\niters-first = 7\niters = 2\nlambda-entropy = 2e-4\n";
  }
  std::vector<std::string> args = {"-i", dir / "in.rgb", "-o", dir / "out.nirv",
                                   "--width", "16", "--height", "16", "--frames", "4",
                                   "--preset", "tiny", "--mlp-width", "64", "--mlp-layers", "2",
                                   "--patch-size", "8", "--group-size", "2",
                                   "--config", dir / "run.toml", "--iters", "4"};
  REQUIRE(run_encode(args) == cli::kOk);
  const StreamMetadata m =
      parse_metadata(BitstreamReader::open(dir / "out.nirv").header().metadata);
  CHECK(m.iterations_first == 7);
  CHECK(m.iterations_rest == 4);
  CHECK(m.lambda == 2e-4);
  CHECK(m.seed == 0);
  CHECK(m.model.width == 64);
  CHECK(run_encode(concat(args, {"--config", dir / "absent.toml"})) == cli::kUsage);
}

TEST_CASE("default flags resolve to the full configuration") {
  int code = -1;
  const std::string out = run_captured({"encode", "-i", "unused.rgb", "-o", "unused.nirv",
                                        "--width", "64", "--height", "64", "--frames", "3",
                                        "--dry-run"},
                                       &code);
  REQUIRE(code == cli::kOk);
  const nlohmann::json j = nlohmann::json::parse(out);
  CHECK(j["model"]["patch_h"] == 32);
  CHECK(j["model"]["patch_w"] == 32);
  CHECK(j["model"]["group_size"] == 3);
  CHECK(j["model"]["width"] == 512);
  CHECK(j["model"]["num_siren_layers"] == 5);
  CHECK(j["iterations_first"] == 16000);
  CHECK(j["iterations_rest"] == 2000);
  CHECK(j["lambda"] == 1e-4);
  CHECK(j["lr"]["latent"] == 5e-4);
  CHECK(j["lr"]["head"] == 5e-4);
  CHECK(j["lr"]["scale"] == 1e-4);
  CHECK(j["lr"]["prob"] == 1e-4);
  CHECK(j["lr_first"] == j["lr"]);
  CHECK(j["chunks"] == 1);
  CHECK(fs::exists("unused.nirv") == false);

  int explicit_code = -1;
  const std::string explicit_out =
      run_captured({"encode", "-i", "unused.rgb", "-o", "unused.nirv", "--width", "64",
                    "--height", "64", "--frames", "3", "--preset", "full", "--dry-run"},
                   &explicit_code);
  REQUIRE(explicit_code == cli::kOk);
  CHECK(explicit_out == out);
  CHECK(run({"encode", "-i", "unused.rgb", "-o", "unused.nirv", "--width", "64", "--height",
             "64", "--frames", "3", "--preset", "huge", "--dry-run"}) == cli::kUsage);

  // 32x32 patches do not tile a 16x16 frame.
  TempDir dir;
  write_raw_video(small_video(3), dir / "in.rgb");
  CHECK(run({"encode", "-i", dir / "in.rgb", "-o", dir / "o", "--width", "16", "--height",
             "16", "--frames", "3"}) == cli::kUsage);
}

TEST_CASE("info sizes add up and corrupt payloads are rejected") {
  TempDir dir;
  write_raw_video(small_video(4), dir / "in.rgb");
  const std::vector<std::string> io = {"-i", dir / "in.rgb", "-o", dir / "out.nirv",
                                       "--width", "16", "--height", "16", "--frames", "4"};
  REQUIRE(run_encode(concat(io, kSmall)) == cli::kOk);
  int code = -1;
  const std::string out = run_captured({"info", "-i", dir / "out.nirv"}, &code);
  REQUIRE(code == cli::kOk);
  std::istringstream lines(out);
  std::string line;
  std::map<std::string, std::string> fields;
  std::size_t group_sum = 0;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key == "group") {
      std::string word;
      std::size_t bytes = 0;
      ls >> word >> bytes;
      group_sum += bytes;
    } else {
      fields[key] = value;
    }
  }
  const std::vector<std::uint8_t> file = read_file(dir / "out.nirv");
  CHECK(fields["frames"] == "4");
  CHECK(fields["group_size"] == "2");
  CHECK(fields["patch"] == "8x8");
  CHECK(std::stoul(fields["payload_bytes"]) == group_sum);
  CHECK(group_sum + std::stoul(fields["header_bytes"]) == file.size());
  CHECK(std::stoul(fields["file_bytes"]) == file.size());
  CHECK(std::stod(fields["bpp"]) == doctest::Approx(bpp(file.size(), 4, 16, 16)).epsilon(1e-6));

  std::vector<std::uint8_t> bad = file;
  bad[bad.size() - 10] ^= 0x40;
  write_file_atomic(dir / "bad.nirv", bad);
  CHECK(run({"decode", "-i", dir / "bad.nirv", "-o", dir / "bad.rgb"}) == cli::kFormat);
  CHECK_FALSE(fs::exists(dir / "bad.rgb"));
  bad = file;
  bad[5] ^= 0x01;
  write_file_atomic(dir / "bad.nirv", bad);
  CHECK(run({"decode", "-i", dir / "bad.nirv", "-o", dir / "bad.rgb"}) == cli::kFormat);
  CHECK_FALSE(fs::exists(dir / "bad.rgb"));
  for (const auto& entry : fs::directory_iterator(dir.path)) {
    CHECK(entry.path().filename().string().find(".tmp") == std::string::npos);
  }
}

TEST_CASE("bench writes one row per video and setting") {
  TempDir dir;
  REQUIRE(run({"bench", "-o", dir / "bench.csv", "--size", "16", "--frames", "4",
               "--videos", "static", "translating", "--lambdas", "0", "1e-4",
               "--patch-sizes", "8", "--group-sizes", "2", "--iters-list", "2",
               "--mlp-width", "64", "--mlp-layers", "2", "--iters-first", "4"}) == cli::kOk);
  std::ifstream csv(dir / "bench.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "video,lambda,patch,group,iters_first,iters,psnr_db,bpp,bytes,seconds");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
  CHECK(run({"bench", "--videos", "fractal", "--size", "16", "--patch-sizes", "8",
             "--mlp-width", "64"}) == cli::kUsage);
}
