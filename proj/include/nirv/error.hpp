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

#include <stdexcept>
#include <string>

namespace nirv {

enum class ErrorCode {
  kIo,
  kFileSizeMismatch,
  kNonDivisibleResolution,
  kShapeMismatch,
  kInvalidConfig,
  kEmptyTensor,
  kSymbolOutOfRange,
  kCorruptStream,
  kBadMagic,
  kUnsupportedVersion,
  kNonFiniteLoss,
  kTooFewFrames,
};

const char* error_code_name(ErrorCode code);

// Every failure surfaced by the library is a CodecError carrying a code the
// CLI can map to an exit status.
class CodecError : public std::runtime_error {
 public:
  CodecError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw CodecError(code, what);
}

inline void check(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace nirv
