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
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/losses.hpp"
#include "fedsim/model.hpp"
#include "fedsim/nn.hpp"

namespace fedsim {

// Which slice of the model a weight-sharing round exchanges.
enum class PartitionKind { kShallow, kDeep };

struct LayerPartition {
  PartitionKind kind = PartitionKind::kShallow;
  // First `boundary` layers count as shallow; 1 <= boundary < layer count.
  std::size_t boundary = 1;
};

// Deep exactly when (round_index + 1) is a multiple of delta and the round
// has cleared the warmup; shallow otherwise. Round indices are zero-based.
PartitionKind select_partition(int round_index, int delta, int warmup);

// End-of-training metrics a client reports after a local phase.
struct ClientReport {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t examples_seen = 0;
};

enum class StrategyKind { kVanilla, kAsyncWeights, kMutualLearning };

struct StrategySpec {
  StrategyKind kind = StrategyKind::kVanilla;
  int delta = 3;
  int warmup = 5;
  int local_epochs = 5;
  int mutual_epochs = 5;
  double lr = 0.05;
  int batch_size = 32;
  KlDirection kl_direction = KlDirection::kForward;
  double kl_coefficient = 1.0;
  // 0 selects the default boundary, ceil(layer_count / 2).
  int shallow_boundary = 0;
};

std::size_t default_boundary(std::size_t layer_count);

// Accuracy-proportional aggregation coefficients: accuracy_i / sum of
// accuracies. If every accuracy is zero the coefficients fall back to
// uniform 1/K and `degenerate` is set so the caller can log it.
struct WeightingResult {
  std::vector<double> coefficients;
  bool degenerate = false;
};
WeightingResult preprocess_weights(const std::vector<ModelParameters>& client_params,
                                   const std::vector<ClientReport>& reports);

// Elementwise convex combination. Coefficients must align with the models
// and sum to 1 within 1e-9; model shapes must agree (mismatches name the
// offending layer). Implemented as anchor + sum of weighted deltas, so a
// combination of identical models returns that model bit-for-bit.
ModelParameters average_weights(const std::vector<ModelParameters>& models,
                                const std::vector<double>& coefficients);

// Deep: returns `averaged` wholesale. Shallow: layers below the partition
// boundary come from `averaged`, the rest keep `current`.
ModelParameters update_weights(const ModelParameters& current,
                               const ModelParameters& averaged,
                               const LayerPartition& partition);

struct LocalTrainResult {
  ModelParameters params;
  ClientReport report;
  // Fold loss at the start of each epoch (eval mode, before that epoch's
  // updates).
  std::vector<double> epoch_losses;
};

// `epochs` full passes of mini-batch SGD on the cross-entropy objective.
// Batches follow a fresh seeded shuffle each epoch; the report holds
// end-of-training accuracy and loss on the fold.
LocalTrainResult local_train(const ModelParameters& params, const Dataset& fold,
                             int epochs, double lr, int batch_size, RngStream& rng);

struct MutualUpdateResult {
  ModelParameters params;
  // Objective components on the full common set at the start of each epoch,
  // peers held fixed.
  std::vector<LossBreakdown> trace;
};

// Mutual-learning phase: spec.mutual_epochs epochs of mini-batch SGD on the
// composite objective (cross-entropy plus the scaled divergence from each
// fixed peer), on the round's common set. Own predictions are live; peer
// predictions stay frozen for the whole phase. With kl_coefficient == 0 the
// parameter trajectory reduces exactly to local_train on the same data.
MutualUpdateResult mutual_update(const ModelParameters& params, const Dataset& common,
                                 const std::vector<std::vector<PredictionDistribution>>& peers,
                                 const StrategySpec& spec, RngStream& rng);

}  // namespace fedsim
