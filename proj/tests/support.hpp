// Copyright 2026 The allin Authors.
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

#include <filesystem>
#include <string>

#include "allin/error.hpp"
#include "allin/numerics.hpp"

#ifndef ALLIN_FIXTURE_DIR
#error "ALLIN_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(ALLIN_FIXTURE_DIR) / name;
}

/// Kind of the allin::Error thrown by fn, or nullopt-like sentinel -1.
template <class Fn>
int error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const allin::Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

inline int kind(allin::ErrorKind k) { return static_cast<int>(k); }

/// Scratch directory unique to one test binary.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("allin-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing

#define CHECK_THROWS_KIND(expr, k) \
  CHECK(::testing::error_kind_of([&] { (void)(expr); }) == ::testing::kind(k))
