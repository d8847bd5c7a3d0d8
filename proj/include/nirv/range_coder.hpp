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

// Static-model range coder over FrequencyTable symbols.
//
// The coder keeps a 56-bit window in 64-bit state (bytes leave the top of the
// window once the range drops below 2^48), so symbol frequencies may use up
// to 32 bits of precision while losing at most ~2^-16 bits per symbol to
// range truncation. Carries propagate through a cached byte and a run of
// pending 0xFF bytes. The final interval is closed with the value that has
// the most trailing zero bits, and trailing zero bytes are dropped because
// the decoder reads zeros past the end.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nirv/quant_entropy.hpp"

namespace nirv {

class RangeEncoder {
 public:
  void encode(std::uint64_t cum, std::uint64_t freq, std::uint64_t total);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();
  void emit(std::uint8_t b);

  std::uint64_t low_ = 0;
  std::uint64_t range_ = (std::uint64_t{1} << 56) - 1;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool skip_first_ = true;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  // Returns the cumulative-frequency target for the next symbol; the caller
  // maps it to a symbol and then calls consume().
  std::uint64_t target(std::uint64_t total);
  void consume(std::uint64_t cum, std::uint64_t freq);

 private:
  std::uint8_t next();

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;
  std::uint64_t range_ = (std::uint64_t{1} << 56) - 1;
  std::uint64_t step_ = 0;
};

std::vector<std::uint8_t> ac_encode(std::span<const std::int32_t> symbols,
                                    const FrequencyTable& table);

// Throws CorruptStream when `bytes` is not exactly the encoding of `count`
// symbols under `table`.
std::vector<std::int32_t> ac_decode(std::span<const std::uint8_t> bytes,
                                    const FrequencyTable& table, std::size_t count);

}  // namespace nirv
