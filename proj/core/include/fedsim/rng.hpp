// Copyright 2026 The fedsim Authors
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

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace fedsim {

// Mixes a master seed with a purpose tag and up to two indices into a fresh
// 64-bit seed. Every consumer of randomness (per-client, per-round, per
// purpose) derives its own stream this way, so results do not depend on the
// order in which worker threads happen to run.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// Seeded random stream. The engine is std::mt19937_64; the conversions to
// doubles, normals and bounded integers are implemented here so that output
// sequences do not depend on standard-library distribution internals.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform draw in [0, 1) with 53 random bits.
  double uniform();
  // Uniform draw in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (the spare value is cached).
  double normal();
  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t uniform_int(std::uint64_t bound);

  // Fisher-Yates shuffle driven by uniform_int.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fedsim
