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

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace nirv {

// Frames of interleaved RGB in [0, 1]; frame-major, row-major within a frame.
struct Video {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Video() = default;
  Video(int w, int h, int frames)
      : width(w), height(h),
        pixels(static_cast<std::size_t>(frames) * w * h * 3, 0.0f) {}

  std::size_t frame_size() const {
    return static_cast<std::size_t>(width) * height * 3;
  }
  int num_frames() const {
    return frame_size() == 0 ? 0 : static_cast<int>(pixels.size() / frame_size());
  }
  std::span<float> frame(int n) {
    return {pixels.data() + n * frame_size(), frame_size()};
  }
  std::span<const float> frame(int n) const {
    return {pixels.data() + n * frame_size(), frame_size()};
  }
  std::size_t index(int n, int y, int x, int c = 0) const {
    return n * frame_size() + (static_cast<std::size_t>(y) * width + x) * 3 + c;
  }
  float& at(int n, int y, int x, int c) { return pixels[index(n, y, x, c)]; }
  float at(int n, int y, int x, int c) const { return pixels[index(n, y, x, c)]; }
};

struct Centroid {
  double x = 0.0;
  double y = 0.0;
};

struct PatchGrid {
  int patch_h = 0;
  int patch_w = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Centroid> centroids;  // row-major

  int size() const { return rows * cols; }
};

// Patch volumes of one frame group, stored flat as
// [patch][frame][row][col][channel] to match the network output layout.
struct FrameGroup {
  int index = 0;
  int first_frame = 0;
  int real_frames = 0;  // frames before repeat-padding
  int group_size = 0;
  int patch_h = 0;
  int patch_w = 0;
  std::vector<float> volumes;

  std::size_t volume_size() const {
    return static_cast<std::size_t>(group_size) * patch_h * patch_w * 3;
  }
  int num_patches() const {
    return volume_size() == 0 ? 0 : static_cast<int>(volumes.size() / volume_size());
  }
};

Video load_raw_video(const std::filesystem::path& path, int width, int height,
                     int num_frames);
void write_raw_video(const Video& video, const std::filesystem::path& path);

// Byte b maps to b / 255; pixels map back with round-half-up and clamping.
float byte_to_pixel(unsigned char b);
unsigned char pixel_to_byte(float v);

PatchGrid patch_centroids(int width, int height, int patch_h, int patch_w);

// Number of groups needed to cover num_frames, counting a padded tail group.
int group_count(int num_frames, int group_size);

std::vector<FrameGroup> segment_groups(const Video& video, const PatchGrid& grid,
                                       int group_size);
FrameGroup make_group(const Video& video, const PatchGrid& grid, int group_size,
                      int group_index);

// Inverse of segmentation. Values are clamped to [0, 1].
Video assemble_frames(std::span<const float> volumes, const PatchGrid& grid,
                      int width, int height, int group_size);

}  // namespace nirv
