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

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/matrix.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Binary-labelled feature table. Features are row-major, one example per
// row; labels are 0/1 and align with the rows.
struct Dataset {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::array<std::size_t, 2> class_counts() const;
};

// CSV with a header row naming the feature columns plus a final `label`
// column holding 0/1. Parse errors cite the offending data row (1-based)
// and, for bad cells, the column.
Dataset load_csv(const std::string& path);

// Canonical header f0,...,f{d-1},label; values in shortest round-trip form,
// so load_csv(save_csv(d)) reproduces d exactly.
void save_csv(const Dataset& dataset, const std::string& path);

// Two spherical unit-variance Gaussians, n/2 examples per class, means
// `separation` apart along the first axis (class 0 at -separation/2,
// class 1 at +separation/2), zero elsewhere. n must be even and positive,
// dim >= 2, separation >= 0. Deterministic per seed.
Dataset generate_synthetic(std::size_t n, std::size_t dim, double separation,
                           std::uint64_t seed);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;  // population std, floored at 1e-12
};

// Per-feature zero-mean unit-variance scaling; returns the transformed data
// and the stats needed to transform held-out data consistently.
std::pair<Dataset, NormalizationStats> normalize(const Dataset& dataset);
Dataset apply_normalization(const Dataset& dataset, const NormalizationStats& stats);

// Row-gather. Indices must be in range.
Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

// Stratified split into (train, holdout). Per class, round(fraction * count)
// examples go to the holdout after a seeded shuffle.
std::pair<Dataset, Dataset> split_holdout(const Dataset& dataset, double fraction,
                                          RngStream& rng);

}  // namespace fedsim
