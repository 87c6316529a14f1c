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

#include <cstddef>
#include <string>
#include <vector>

#include "fedsim/matrix.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// One fully connected layer. `weights` is out x in, `biases` has one entry
// per output unit. Hidden layers apply ReLU followed by inverted dropout on
// their output; the final layer is a single sigmoid unit with no dropout.
struct DenseLayer {
  Matrix weights;
  std::vector<double> biases;
  double dropout_rate = 0.0;
};

struct ModelParameters {
  std::vector<DenseLayer> layers;

  std::size_t layer_count() const { return layers.size(); }
  std::size_t input_size() const;
  std::size_t parameter_count() const;
  // Parameters in layers [0, boundary), i.e. the shallow slice.
  std::size_t parameter_count_below(std::size_t boundary) const;
  bool same_shape(const ModelParameters& other) const;
};

// Rejects models whose layer dimensions do not chain, whose head is not a
// single unit, whose dropout rates are out of [0, 1) (or nonzero on the
// head), or that contain non-finite values.
void validate_parameters(const ModelParameters& params);

bool all_finite(const ModelParameters& params);

struct LayerGradient {
  Matrix weights;
  std::vector<double> biases;
};

struct GradientSet {
  std::vector<LayerGradient> layers;
  bool same_shape(const ModelParameters& params) const;
};

GradientSet zero_gradients(const ModelParameters& params);

// Glorot-uniform initialisation: weights drawn from
// +-sqrt(6 / (fan_in + fan_out)), biases zero. `hidden` lists hidden layer
// widths (may be empty for a plain logistic model); `dropout` must align
// with `hidden`.
ModelParameters make_model(std::size_t input_dim, const std::vector<int>& hidden,
                           const std::vector<double>& dropout, RngStream& rng);

// Self-describing text checkpoint; load(save(m)) reproduces m exactly.
void save_model(const ModelParameters& params, const std::string& path);
ModelParameters load_model(const std::string& path);

}  // namespace fedsim
