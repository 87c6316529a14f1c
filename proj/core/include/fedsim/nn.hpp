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
#include <utility>
#include <vector>

#include "fedsim/losses.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class ForwardMode { kTrain, kEval };

// Intermediate state kept by a training-mode forward pass so the backward
// pass can reuse it. inputs[k] is the activation entering layer k;
// dropout_scale[k] holds mask/(1-rate) for hidden layer k's output (empty
// matrix when dropout is off or in eval mode).
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> dropout_scale;
};

struct ForwardResult {
  std::vector<PredictionDistribution> predictions;
  ForwardCache cache;
};

// Forward pass over a batch (rows = examples). Eval mode is deterministic;
// train mode draws one dropout mask per hidden unit per example from `rng`
// (required whenever any dropout rate is positive).
ForwardResult forward(const ModelParameters& params, const Matrix& batch,
                      ForwardMode mode, RngStream* rng = nullptr);

// Deterministic eval-mode predictions.
std::vector<PredictionDistribution> predict(const ModelParameters& params,
                                            const Matrix& batch);

// Objective value on a batch, eval-mode forward, no gradient. Used for loss
// traces and the finite-difference check.
LossBreakdown loss_components(const ModelParameters& params, const Matrix& batch,
                              const std::vector<int>& labels, const LossSpec& spec);

// Training loss and its analytic gradient on one batch (train-mode forward;
// the loss is a mean over examples). The gradient of the divergence term is
// taken with peers held fixed.
std::pair<double, GradientSet> compute_gradients(const ModelParameters& params,
                                                 const Matrix& batch,
                                                 const std::vector<int>& labels,
                                                 const LossSpec& spec,
                                                 RngStream* rng = nullptr);

// params - lr * grads, elementwise. lr must be finite and non-negative;
// shapes must match.
ModelParameters sgd_step(const ModelParameters& params, const GradientSet& grads,
                         double lr);

// Central-difference audit of compute_gradients with dropout disabled.
// Returns the maximum relative error over checked coordinates (all of them
// up to `max_coordinates`, then a seeded sample). `step` must lie in
// [1e-6, 1e-3].
double finite_difference_check(const ModelParameters& params, const Matrix& batch,
                               const std::vector<int>& labels, const LossSpec& spec,
                               double step = 1e-5, std::size_t max_coordinates = 2000,
                               std::uint64_t sample_seed = 0);

}  // namespace fedsim
