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

namespace nirv::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIoError = 3,
  kNumeric = 4,
  kFormat = 5,
};

// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv);

}  // namespace nirv::cli
