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

// Bitstream layout (all integers little-endian):
//
//   "NIRV" | u16 version | u32 frames | u16 height | u16 width
//   u8 patch_h | u8 patch_w | u8 group_size | 16-byte digest
//   u16 chunk_count | chunk_count x (u32 first_group, u32 group_count, u64 offset)
//   u32 metadata_len | metadata | u32 crc32(metadata)
//   payloads: u32 body_len | body | u32 crc32(body)
//
// The digest is the first 16 bytes of SHA-256 over every header byte except
// the digest itself, followed by the metadata block, so any header change is
// detected before decoding. Chunk offsets are absolute file offsets of each
// chunk's first payload.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nirv/quant_entropy.hpp"

namespace nirv {

inline constexpr std::uint16_t kFormatVersion = 1;

// Head-parameter storage modes inside a payload.
enum class HeadCoding : std::uint8_t {
  kRawFloat32 = 0,     // absolute float32 values
  kLzmaFloatDelta = 1, // float32 deltas, byte-plane shuffled, xz/LZMA2
};

struct TensorPayload {
  float scale = 0.0f;
  FrequencyTable table;
  std::uint32_t symbol_count = 0;
  std::vector<std::uint8_t> coded;

  bool operator==(const TensorPayload&) const = default;
};

struct GroupPayload {
  std::uint32_t group_index = 0;
  std::vector<TensorPayload> tensors;
  HeadCoding head_coding = HeadCoding::kRawFloat32;
  std::uint32_t head_count = 0;
  std::vector<std::uint8_t> head_bytes;

  bool operator==(const GroupPayload&) const = default;
};

struct ChunkEntry {
  std::uint32_t first_group = 0;
  std::uint32_t group_count = 0;
  std::uint64_t offset = 0;

  bool operator==(const ChunkEntry&) const = default;
};

struct BitstreamHeader {
  std::uint16_t version = kFormatVersion;
  std::uint32_t frames = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint8_t patch_h = 0;
  std::uint8_t patch_w = 0;
  std::uint8_t group_size = 0;
  std::array<std::uint8_t, 16> digest{};
  std::vector<ChunkEntry> chunks;
  // Opaque to the container; the pipeline stores the model configuration here.
  std::vector<std::uint8_t> metadata;

  std::uint32_t total_groups() const;
  bool operator==(const BitstreamHeader&) const = default;
};

// --- residuals --------------------------------------------------------------

std::vector<std::int32_t> residual(std::span<const std::int32_t> current,
                                   std::span<const std::int32_t> previous);
std::vector<std::int32_t> accumulate(std::span<const std::int32_t> previous,
                                     std::span<const std::int32_t> residual);

// 8 * bytes / (frames * height * width).
double bpp(std::uint64_t total_stream_bytes, std::uint64_t frames, std::uint64_t height,
           std::uint64_t width);

// --- head parameters --------------------------------------------------------

std::vector<std::uint8_t> compress_float_delta(std::span<const float> delta);
std::vector<float> decompress_float_delta(std::span<const std::uint8_t> bytes,
                                          std::size_t count);

// --- payloads ---------------------------------------------------------------

TensorPayload encode_tensor(std::span<const std::int32_t> symbols, float scale);
std::vector<std::int32_t> decode_tensor(const TensorPayload& payload);

std::vector<std::uint8_t> serialize_payload_body(const GroupPayload& payload);
GroupPayload parse_payload_body(std::span<const std::uint8_t> body);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

// --- container --------------------------------------------------------------

// Lays out payloads grouped by chunk, fills in header.chunks and
// header.digest, and returns the file image.
std::vector<std::uint8_t> serialize_container(BitstreamHeader& header,
                                              const std::vector<std::vector<GroupPayload>>& chunks);
void write_container(BitstreamHeader& header,
                     const std::vector<std::vector<GroupPayload>>& chunks,
                     const std::filesystem::path& path);

class BitstreamReader {
 public:
  explicit BitstreamReader(std::vector<std::uint8_t> file);
  static BitstreamReader open(const std::filesystem::path& path);

  const BitstreamHeader& header() const { return header_; }
  std::size_t file_size() const { return file_.size(); }
  std::size_t header_size() const { return header_size_; }

  // Parses and checksums the payloads of one chunk without touching others.
  std::vector<GroupPayload> chunk_payloads(std::size_t chunk) const;
  // Framed size (length prefix + body + checksum) of each payload in a chunk.
  std::vector<std::size_t> chunk_payload_sizes(std::size_t chunk) const;

 private:
  std::vector<std::uint8_t> file_;
  BitstreamHeader header_;
  std::size_t header_size_ = 0;
};

}  // namespace nirv
