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

#include "nirv/stream_codec.hpp"

#include <lzma.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <string>

#include "nirv/file_util.hpp"
#include "nirv/range_coder.hpp"

namespace nirv {

namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'I', 'R', 'V'};
// Offset of the digest inside the fixed header prefix.
constexpr std::size_t kDigestOffset = 4 + 2 + 4 + 2 + 2 + 1 + 1 + 1;
constexpr std::size_t kMaxMetadata = 1 << 16;

std::array<std::uint8_t, 16> header_digest(std::span<const std::uint8_t> header) {
  std::vector<std::uint8_t> copy(header.begin(), header.end());
  std::fill_n(copy.begin() + kDigestOffset, 16, 0);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(copy.data(), copy.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kIo, "SHA-256 digest failed");
  }
  std::array<std::uint8_t, 16> out;
  std::copy_n(md, 16, out.begin());
  return out;
}

}  // namespace

std::uint32_t BitstreamHeader::total_groups() const {
  std::uint32_t n = 0;
  for (const auto& c : chunks) n += c.group_count;
  return n;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

// --- residuals --------------------------------------------------------------

std::vector<std::int32_t> residual(std::span<const std::int32_t> current,
                                   std::span<const std::int32_t> previous) {
  check(current.size() == previous.size(), ErrorCode::kShapeMismatch,
        "residual: tensors differ in size");
  std::vector<std::int32_t> out(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    const std::int64_t d = static_cast<std::int64_t>(current[i]) - previous[i];
    check(d >= std::numeric_limits<std::int32_t>::min() &&
              d <= std::numeric_limits<std::int32_t>::max(),
          ErrorCode::kSymbolOutOfRange, "residual overflows 32 bits");
    out[i] = static_cast<std::int32_t>(d);
  }
  return out;
}

std::vector<std::int32_t> accumulate(std::span<const std::int32_t> previous,
                                     std::span<const std::int32_t> res) {
  check(previous.size() == res.size(), ErrorCode::kShapeMismatch,
        "accumulate: tensors differ in size");
  std::vector<std::int32_t> out(previous.size());
  for (std::size_t i = 0; i < previous.size(); ++i) {
    const std::int64_t v = static_cast<std::int64_t>(previous[i]) + res[i];
    check(v >= std::numeric_limits<std::int32_t>::min() &&
              v <= std::numeric_limits<std::int32_t>::max(),
          ErrorCode::kCorruptStream, "accumulated latent overflows 32 bits");
    out[i] = static_cast<std::int32_t>(v);
  }
  return out;
}

double bpp(std::uint64_t total_stream_bytes, std::uint64_t frames, std::uint64_t height,
           std::uint64_t width) {
  return 8.0 * static_cast<double>(total_stream_bytes) /
         (static_cast<double>(frames) * static_cast<double>(height) *
          static_cast<double>(width));
}

// --- head parameters --------------------------------------------------------

std::vector<std::uint8_t> compress_float_delta(std::span<const float> delta) {
  // Byte planes: all low bytes first, then the next byte of every value, ...
  const std::size_t n = delta.size();
  std::vector<std::uint8_t> planes(n * 4);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(delta[i]);
    for (std::size_t b = 0; b < 4; ++b) planes[b * n + i] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  std::vector<std::uint8_t> out(lzma_stream_buffer_bound(planes.size()));
  std::size_t out_pos = 0;
  const lzma_ret ret =
      lzma_easy_buffer_encode(9 | LZMA_PRESET_EXTREME, LZMA_CHECK_NONE, nullptr, planes.data(),
                              planes.size(), out.data(), &out_pos, out.size());
  if (ret != LZMA_OK) fail(ErrorCode::kIo, "lzma encode failed");
  out.resize(out_pos);
  return out;
}

std::vector<float> decompress_float_delta(std::span<const std::uint8_t> bytes,
                                          std::size_t count) {
  std::vector<std::uint8_t> planes(count * 4);
  std::uint64_t memlimit = std::uint64_t{1} << 30;
  std::size_t in_pos = 0, out_pos = 0;
  const lzma_ret ret =
      lzma_stream_buffer_decode(&memlimit, 0, nullptr, bytes.data(), &in_pos, bytes.size(),
                                planes.data(), &out_pos, planes.size());
  if (ret != LZMA_OK || in_pos != bytes.size() || out_pos != planes.size()) {
    fail(ErrorCode::kCorruptStream, "head delta block does not decompress");
  }
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(planes[b * count + i]) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

// --- payloads ---------------------------------------------------------------

TensorPayload encode_tensor(std::span<const std::int32_t> symbols, float scale) {
  TensorPayload p;
  p.scale = scale;
  p.table = build_frequency_table(symbols);
  p.symbol_count = static_cast<std::uint32_t>(symbols.size());
  p.coded = ac_encode(symbols, p.table);
  return p;
}

std::vector<std::int32_t> decode_tensor(const TensorPayload& payload) {
  return ac_decode(payload.coded, payload.table, payload.symbol_count);
}

std::vector<std::uint8_t> serialize_payload_body(const GroupPayload& payload) {
  ByteWriter w;
  w.u32(payload.group_index);
  check(payload.tensors.size() < 256, ErrorCode::kInvalidConfig, "too many latent tensors");
  w.u8(static_cast<std::uint8_t>(payload.tensors.size()));
  for (const TensorPayload& t : payload.tensors) {
    w.f32(t.scale);
    w.varint(t.symbol_count);
    t.table.serialize(w);
    w.varint(t.coded.size());
    w.raw(t.coded);
  }
  w.u8(static_cast<std::uint8_t>(payload.head_coding));
  w.varint(payload.head_count);
  w.varint(payload.head_bytes.size());
  w.raw(payload.head_bytes);
  return w.take();
}

GroupPayload parse_payload_body(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  GroupPayload p;
  p.group_index = r.u32();
  const std::size_t tensors = r.u8();
  p.tensors.resize(tensors);
  for (TensorPayload& t : p.tensors) {
    t.scale = r.f32();
    const std::uint64_t count = r.varint();
    if (count > std::numeric_limits<std::uint32_t>::max()) {
      fail(ErrorCode::kCorruptStream, "symbol count too large");
    }
    t.symbol_count = static_cast<std::uint32_t>(count);
    t.table = FrequencyTable::deserialize(r);
    const std::uint64_t len = r.varint();
    if (len > r.remaining()) fail(ErrorCode::kCorruptStream, "coded block overruns payload");
    const auto coded = r.raw(static_cast<std::size_t>(len));
    t.coded.assign(coded.begin(), coded.end());
  }
  const std::uint8_t coding = r.u8();
  if (coding > static_cast<std::uint8_t>(HeadCoding::kLzmaFloatDelta)) {
    fail(ErrorCode::kCorruptStream, "unknown head coding " + std::to_string(coding));
  }
  p.head_coding = static_cast<HeadCoding>(coding);
  const std::uint64_t head_count = r.varint();
  const std::uint64_t head_len = r.varint();
  if (head_count > (1u << 28) || head_len > r.remaining()) {
    fail(ErrorCode::kCorruptStream, "head block overruns payload");
  }
  p.head_count = static_cast<std::uint32_t>(head_count);
  const auto head = r.raw(static_cast<std::size_t>(head_len));
  p.head_bytes.assign(head.begin(), head.end());
  if (r.remaining() != 0) fail(ErrorCode::kCorruptStream, "trailing bytes in payload");
  return p;
}

// --- container --------------------------------------------------------------

std::vector<std::uint8_t> serialize_container(
    BitstreamHeader& header, const std::vector<std::vector<GroupPayload>>& chunks) {
  check(header.height > 0 && header.width > 0 &&
            header.group_size > 0 && header.patch_h > 0 && header.patch_w > 0,
        ErrorCode::kInvalidConfig, "header geometry must be positive");
  check((header.frames == 0) == chunks.empty() && chunks.size() <= 0xFFFF, ErrorCode::kInvalidConfig,
        "chunk count out of range");
  check(header.metadata.size() <= kMaxMetadata, ErrorCode::kInvalidConfig,
        "metadata block too large");

  std::vector<std::vector<std::uint8_t>> frames;
  std::vector<std::size_t> chunk_bytes;
  for (const auto& chunk : chunks) {
    check(!chunk.empty(), ErrorCode::kInvalidConfig, "empty chunk");
    std::size_t bytes = 0;
    for (const GroupPayload& p : chunk) {
      std::vector<std::uint8_t> body = serialize_payload_body(p);
      ByteWriter f;
      f.u32(static_cast<std::uint32_t>(body.size()));
      f.raw(body);
      f.u32(crc32_of(body));
      bytes += f.size();
      frames.push_back(f.take());
    }
    chunk_bytes.push_back(bytes);
  }

  const std::size_t header_size =
      kDigestOffset + 16 + 2 + 16 * chunks.size() + 4 + header.metadata.size() + 4;
  header.version = kFormatVersion;
  header.chunks.clear();
  std::uint32_t group = 0;
  std::uint64_t offset = header_size;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    for (std::size_t i = 0; i < chunks[c].size(); ++i) {
      check(chunks[c][i].group_index == group + i, ErrorCode::kInvalidConfig,
            "payloads must be ordered by group index");
    }
    header.chunks.push_back({group, static_cast<std::uint32_t>(chunks[c].size()), offset});
    group += static_cast<std::uint32_t>(chunks[c].size());
    offset += chunk_bytes[c];
  }

  ByteWriter w;
  w.raw(kMagic);
  w.u16(header.version);
  w.u32(header.frames);
  w.u16(header.height);
  w.u16(header.width);
  w.u8(header.patch_h);
  w.u8(header.patch_w);
  w.u8(header.group_size);
  for (int i = 0; i < 16; ++i) w.u8(0);
  w.u16(static_cast<std::uint16_t>(header.chunks.size()));
  for (const ChunkEntry& e : header.chunks) {
    w.u32(e.first_group);
    w.u32(e.group_count);
    w.u64(e.offset);
  }
  w.u32(static_cast<std::uint32_t>(header.metadata.size()));
  w.raw(header.metadata);
  w.u32(crc32_of(header.metadata));
  check(w.size() == header_size, ErrorCode::kInvalidConfig, "header size mismatch");

  std::vector<std::uint8_t> out = w.take();
  header.digest = header_digest(out);
  std::copy(header.digest.begin(), header.digest.end(), out.begin() + kDigestOffset);
  for (const auto& f : frames) out.insert(out.end(), f.begin(), f.end());
  return out;
}

void write_container(BitstreamHeader& header,
                     const std::vector<std::vector<GroupPayload>>& chunks,
                     const std::filesystem::path& path) {
  write_file_atomic(path, serialize_container(header, chunks));
}

BitstreamReader::BitstreamReader(std::vector<std::uint8_t> file) : file_(std::move(file)) {
  if (file_.size() < 4 || !std::equal(kMagic, kMagic + 4, file_.begin())) {
    fail(ErrorCode::kBadMagic, "not a NIRV bitstream");
  }
  ByteReader r(file_);
  r.raw(4);
  header_.version = r.u16();
  if (header_.version != kFormatVersion) {
    fail(ErrorCode::kUnsupportedVersion,
         "bitstream version " + std::to_string(header_.version) + " is not supported");
  }
  header_.frames = r.u32();
  header_.height = r.u16();
  header_.width = r.u16();
  header_.patch_h = r.u8();
  header_.patch_w = r.u8();
  header_.group_size = r.u8();
  const auto digest = r.raw(16);
  std::copy(digest.begin(), digest.end(), header_.digest.begin());
  const std::size_t chunk_count = r.u16();
  for (std::size_t c = 0; c < chunk_count; ++c) {
    ChunkEntry e;
    e.first_group = r.u32();
    e.group_count = r.u32();
    e.offset = r.u64();
    header_.chunks.push_back(e);
  }
  const std::size_t meta_len = r.u32();
  if (meta_len > kMaxMetadata) fail(ErrorCode::kCorruptStream, "metadata block too large");
  const auto meta = r.raw(meta_len);
  header_.metadata.assign(meta.begin(), meta.end());
  const std::uint32_t meta_crc = r.u32();
  header_size_ = r.position();

  if (header_digest({file_.data(), header_size_}) != header_.digest) {
    fail(ErrorCode::kCorruptStream, "header digest mismatch");
  }
  if (crc32_of(header_.metadata) != meta_crc) {
    fail(ErrorCode::kCorruptStream, "metadata checksum mismatch");
  }
  if (header_.height == 0 || header_.width == 0 || header_.group_size == 0 ||
      header_.patch_h == 0 || header_.patch_w == 0 ||
      (header_.frames == 0) != header_.chunks.empty() ||
      (header_.chunks.empty() && file_.size() != header_size_)) {
    fail(ErrorCode::kCorruptStream, "header geometry is invalid");
  }
  std::uint32_t group = 0;
  std::uint64_t prev_offset = 0;
  for (std::size_t c = 0; c < header_.chunks.size(); ++c) {
    const ChunkEntry& e = header_.chunks[c];
    const bool offset_ok = c == 0 ? e.offset == header_size_ : e.offset > prev_offset;
    if (e.group_count == 0 || e.first_group != group || !offset_ok ||
        e.offset >= file_.size()) {
      fail(ErrorCode::kCorruptStream, "chunk table entry " + std::to_string(c) + " is invalid");
    }
    group += e.group_count;
    prev_offset = e.offset;
  }
  const std::uint32_t expected_groups =
      (header_.frames + header_.group_size - 1) / header_.group_size;
  if (group != expected_groups) {
    fail(ErrorCode::kCorruptStream, "chunk table does not cover every frame group");
  }
}

BitstreamReader BitstreamReader::open(const std::filesystem::path& path) {
  return BitstreamReader(read_file(path));
}

namespace {

struct Frame {
  std::size_t begin;
  std::size_t size;
  std::span<const std::uint8_t> body;
};

std::vector<Frame> scan_chunk(std::span<const std::uint8_t> file, const BitstreamHeader& h,
                              std::size_t chunk) {
  check(chunk < h.chunks.size(), ErrorCode::kInvalidConfig, "chunk index out of range");
  const ChunkEntry& e = h.chunks[chunk];
  const std::size_t end = chunk + 1 < h.chunks.size() ? h.chunks[chunk + 1].offset : file.size();
  ByteReader r(file.subspan(e.offset, end - e.offset));
  std::vector<Frame> frames;
  for (std::uint32_t i = 0; i < e.group_count; ++i) {
    const std::size_t begin = e.offset + r.position();
    const std::uint32_t len = r.u32();
    const auto body = r.raw(len);
    const std::uint32_t crc = r.u32();
    if (crc32_of(body) != crc) {
      fail(ErrorCode::kCorruptStream,
           "payload checksum mismatch for group " + std::to_string(e.first_group + i));
    }
    frames.push_back({begin, static_cast<std::size_t>(len) + 8, body});
  }
  if (r.remaining() != 0) fail(ErrorCode::kCorruptStream, "chunk has trailing bytes");
  return frames;
}

}  // namespace

std::vector<GroupPayload> BitstreamReader::chunk_payloads(std::size_t chunk) const {
  std::vector<GroupPayload> out;
  const std::uint32_t first = header_.chunks.at(chunk).first_group;
  for (const Frame& f : scan_chunk(file_, header_, chunk)) {
    GroupPayload p = parse_payload_body(f.body);
    if (p.group_index != first + out.size()) {
      fail(ErrorCode::kCorruptStream, "payload group index out of order");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::size_t> BitstreamReader::chunk_payload_sizes(std::size_t chunk) const {
  std::vector<std::size_t> out;
  for (const Frame& f : scan_chunk(file_, header_, chunk)) out.push_back(f.size);
  return out;
}

}  // namespace nirv
