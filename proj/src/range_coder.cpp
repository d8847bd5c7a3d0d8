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

#include "nirv/range_coder.hpp"

#include <algorithm>
#include <string>

namespace nirv {

namespace {

constexpr int kWindowBits = 56;
constexpr std::uint64_t kWindowMask = (std::uint64_t{1} << kWindowBits) - 1;
constexpr std::uint64_t kBottom = std::uint64_t{1} << 48;
constexpr std::uint64_t kTopByteFF = std::uint64_t{0xFF} << 48;

// Every block ends with this value coded over 2^16 equiprobable slots.
constexpr std::uint64_t kTerminatorTotal = std::uint64_t{1} << 16;
constexpr std::uint64_t kTerminator = 0xA5C3;

std::vector<std::uint64_t> cumulative(const FrequencyTable& table) {
  std::vector<std::uint64_t> cum(table.counts.size() + 1, 0);
  for (std::size_t i = 0; i < table.counts.size(); ++i) cum[i + 1] = cum[i] + table.counts[i];
  return cum;
}

}  // namespace

void RangeEncoder::emit(std::uint8_t b) {
  // The leading byte only carries bits above the initial window and is
  // always zero, so it is not stored.
  if (skip_first_) {
    skip_first_ = false;
    return;
  }
  out_.push_back(b);
}

void RangeEncoder::shift_low() {
  const std::uint64_t window = low_ & kWindowMask;
  const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> kWindowBits);
  if (window < kTopByteFF || carry != 0) {
    std::uint8_t byte = cache_;
    do {
      emit(static_cast<std::uint8_t>(byte + carry));
      byte = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(window >> 48);
  }
  ++cache_size_;
  low_ = (window & (kBottom - 1)) << 8;
}

void RangeEncoder::encode(std::uint64_t cum, std::uint64_t freq, std::uint64_t total) {
  const std::uint64_t r = range_ / total;
  low_ += r * cum;
  range_ = r * freq;
  while (range_ < kBottom) {
    range_ <<= 8;
    shift_low();
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  // Pick the value in [low, low + range) with the most trailing zeros.
  const std::uint64_t hi = low_ + range_ - 1;
  for (int k = kWindowBits; k >= 0; --k) {
    const std::uint64_t mask = (std::uint64_t{1} << k) - 1;
    const std::uint64_t v = (low_ + mask) & ~mask;
    if (v >= low_ && v <= hi) {
      low_ = v;
      break;
    }
  }
  for (int i = 0; i < kWindowBits / 8 + 1; ++i) shift_low();
  while (!out_.empty() && out_.back() == 0) out_.pop_back();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < kWindowBits / 8; ++i) code_ = (code_ << 8) | next();
}

std::uint8_t RangeDecoder::next() {
  return pos_ < bytes_.size() ? bytes_[pos_++] : std::uint8_t{0};
}

std::uint64_t RangeDecoder::target(std::uint64_t total) {
  step_ = range_ / total;
  const std::uint64_t v = code_ / step_;
  if (v >= total) fail(ErrorCode::kCorruptStream, "range decoder overran its interval");
  return v;
}

void RangeDecoder::consume(std::uint64_t cum, std::uint64_t freq) {
  code_ -= step_ * cum;
  range_ = step_ * freq;
  while (range_ < kBottom) {
    code_ = ((code_ << 8) | next()) & kWindowMask;
    range_ <<= 8;
  }
}

std::vector<std::uint8_t> ac_encode(std::span<const std::int32_t> symbols,
                                    const FrequencyTable& table) {
  const std::vector<std::uint64_t> cum = cumulative(table);
  RangeEncoder enc;
  for (std::int32_t s : symbols) {
    if (!table.contains(s)) {
      fail(ErrorCode::kSymbolOutOfRange, "symbol " + std::to_string(s) +
                                             " outside table range [" +
                                             std::to_string(table.min_symbol) + ", " +
                                             std::to_string(table.max_symbol()) + "]");
    }
    const std::size_t i = static_cast<std::size_t>(s - table.min_symbol);
    enc.encode(cum[i], table.counts[i], table.total);
  }
  enc.encode(kTerminator, 1, kTerminatorTotal);
  return enc.finish();
}

std::vector<std::int32_t> ac_decode(std::span<const std::uint8_t> bytes,
                                    const FrequencyTable& table, std::size_t count) {
  check(!table.counts.empty() && table.total > 0, ErrorCode::kCorruptStream,
        "empty frequency table");
  const std::vector<std::uint64_t> cum = cumulative(table);
  RangeDecoder dec(bytes);
  // Re-encoding the decoded symbols must reproduce the input exactly; this
  // rejects truncated, padded, or otherwise altered blocks.
  RangeEncoder shadow;
  std::vector<std::int32_t> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::uint64_t v = dec.target(table.total);
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), v) - cum.begin()) - 1;
    dec.consume(cum[i], table.counts[i]);
    shadow.encode(cum[i], table.counts[i], table.total);
    out.push_back(table.min_symbol + static_cast<std::int32_t>(i));
  }
  if (dec.target(kTerminatorTotal) != kTerminator) {
    fail(ErrorCode::kCorruptStream, "coded block terminator mismatch");
  }
  shadow.encode(kTerminator, 1, kTerminatorTotal);
  const std::vector<std::uint8_t> expected = shadow.finish();
  if (!std::equal(expected.begin(), expected.end(), bytes.begin(), bytes.end())) {
    fail(ErrorCode::kCorruptStream, "coded block does not terminate where expected");
  }
  return out;
}

}  // namespace nirv
