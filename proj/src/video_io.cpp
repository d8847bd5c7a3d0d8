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

#include "nirv/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nirv/error.hpp"
#include "nirv/file_util.hpp"

namespace nirv {

float byte_to_pixel(unsigned char b) { return static_cast<float>(b) / 255.0f; }

unsigned char pixel_to_byte(float v) {
  const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
}

Video load_raw_video(const std::filesystem::path& path, int width, int height,
                     int num_frames) {
  check(width > 0 && height > 0 && num_frames > 0, ErrorCode::kInvalidConfig,
        "video dimensions must be positive");
  const std::vector<std::uint8_t> bytes = read_file(path);
  Video video(width, height, num_frames);
  if (bytes.size() != video.pixels.size()) {
    fail(ErrorCode::kFileSizeMismatch,
         path.string() + " holds " + std::to_string(bytes.size()) +
             " bytes, expected " + std::to_string(video.pixels.size()));
  }
  std::transform(bytes.begin(), bytes.end(), video.pixels.begin(), byte_to_pixel);
  return video;
}

void write_raw_video(const Video& video, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(video.pixels.size());
  std::transform(video.pixels.begin(), video.pixels.end(), bytes.begin(),
                 pixel_to_byte);
  write_file_atomic(path, bytes);
}

PatchGrid patch_centroids(int width, int height, int patch_h, int patch_w) {
  check(width > 0 && height > 0 && patch_h > 0 && patch_w > 0,
        ErrorCode::kInvalidConfig, "dimensions must be positive");
  if (width % patch_w != 0 || height % patch_h != 0) {
    fail(ErrorCode::kNonDivisibleResolution,
         std::to_string(width) + "x" + std::to_string(height) +
             " is not divisible by patch " + std::to_string(patch_w) + "x" +
             std::to_string(patch_h));
  }
  PatchGrid grid;
  grid.patch_h = patch_h;
  grid.patch_w = patch_w;
  grid.rows = height / patch_h;
  grid.cols = width / patch_w;
  grid.centroids.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r) {
    const double cy = r * patch_h + (patch_h - 1) / 2.0;
    for (int c = 0; c < grid.cols; ++c) {
      const double cx = c * patch_w + (patch_w - 1) / 2.0;
      grid.centroids.push_back({2.0 * (cx + 0.5) / width - 1.0,
                                2.0 * (cy + 0.5) / height - 1.0});
    }
  }
  return grid;
}

int group_count(int num_frames, int group_size) {
  return (num_frames + group_size - 1) / group_size;
}

FrameGroup make_group(const Video& video, const PatchGrid& grid, int group_size,
                      int group_index) {
  check(group_size > 0, ErrorCode::kInvalidConfig, "group size must be positive");
  if (video.width != grid.cols * grid.patch_w ||
      video.height != grid.rows * grid.patch_h) {
    fail(ErrorCode::kNonDivisibleResolution, "grid does not tile the video");
  }
  const int n = video.num_frames();
  FrameGroup group;
  group.index = group_index;
  group.first_frame = group_index * group_size;
  group.real_frames = std::clamp(n - group.first_frame, 0, group_size);
  check(group.real_frames > 0, ErrorCode::kShapeMismatch, "group beyond video end");
  group.group_size = group_size;
  group.patch_h = grid.patch_h;
  group.patch_w = grid.patch_w;
  group.volumes.resize(group.volume_size() * grid.size());

  const std::size_t row_len = static_cast<std::size_t>(grid.patch_w) * 3;
  float* out = group.volumes.data();
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      for (int t = 0; t < group_size; ++t) {
        // Tail groups repeat the final frame.
        const int frame = std::min(group.first_frame + t, n - 1);
        for (int y = 0; y < grid.patch_h; ++y) {
          const float* src =
              video.pixels.data() + video.index(frame, r * grid.patch_h + y, c * grid.patch_w);
          out = std::copy(src, src + row_len, out);
        }
      }
    }
  }
  return group;
}

std::vector<FrameGroup> segment_groups(const Video& video, const PatchGrid& grid,
                                       int group_size) {
  check(group_size > 0, ErrorCode::kInvalidConfig, "group size must be positive");
  const int groups = group_count(video.num_frames(), group_size);
  std::vector<FrameGroup> out;
  out.reserve(groups);
  for (int g = 0; g < groups; ++g) out.push_back(make_group(video, grid, group_size, g));
  return out;
}

Video assemble_frames(std::span<const float> volumes, const PatchGrid& grid,
                      int width, int height, int group_size) {
  const std::size_t volume =
      static_cast<std::size_t>(group_size) * grid.patch_h * grid.patch_w * 3;
  if (width != grid.cols * grid.patch_w || height != grid.rows * grid.patch_h ||
      volumes.size() != volume * grid.size()) {
    fail(ErrorCode::kShapeMismatch, "patch volumes do not match the grid");
  }
  Video video(width, height, group_size);
  const std::size_t row_len = static_cast<std::size_t>(grid.patch_w) * 3;
  const float* in = volumes.data();
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      for (int t = 0; t < group_size; ++t) {
        for (int y = 0; y < grid.patch_h; ++y) {
          float* dst = &video.at(t, r * grid.patch_h + y, c * grid.patch_w, 0);
          for (std::size_t i = 0; i < row_len; ++i) {
            dst[i] = std::clamp(in[i], 0.0f, 1.0f);
          }
          in += row_len;
        }
      }
    }
  }
  return video;
}

}  // namespace nirv
