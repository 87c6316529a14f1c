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

#include "fedsim/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

PartitionKind select_partition(int round_index, int delta, int warmup) {
  if (round_index < 0) {
    throw std::invalid_argument("select_partition: round_index must be >= 0");
  }
  if (delta < 1) {
    throw std::invalid_argument("select_partition: delta must be >= 1");
  }
  if (warmup < 0) {
    throw std::invalid_argument("select_partition: warmup must be >= 0");
  }
  bool deep = (round_index + 1) % delta == 0 && round_index >= warmup;
  return deep ? PartitionKind::kDeep : PartitionKind::kShallow;
}

std::size_t default_boundary(std::size_t layer_count) {
  if (layer_count < 2) {
    throw std::invalid_argument(
        "default_boundary: need at least 2 layers to split");
  }
  return (layer_count + 1) / 2;
}

WeightingResult preprocess_weights(const std::vector<ModelParameters>& client_params,
                                   const std::vector<ClientReport>& reports) {
  if (client_params.empty()) {
    throw std::invalid_argument("preprocess_weights: no clients");
  }
  if (reports.size() != client_params.size()) {
    throw std::invalid_argument("preprocess_weights: " +
                                std::to_string(reports.size()) + " reports for " +
                                std::to_string(client_params.size()) + " clients");
  }
  double sum = 0.0;
  for (const ClientReport& report : reports) {
    if (!std::isfinite(report.accuracy) || report.accuracy < 0.0 ||
        report.accuracy > 1.0) {
      throw std::invalid_argument(
          "preprocess_weights: accuracy must lie in [0, 1]");
    }
    sum += report.accuracy;
  }
  WeightingResult result;
  result.coefficients.reserve(reports.size());
  if (sum == 0.0) {
    result.degenerate = true;
    double uniform = 1.0 / static_cast<double>(reports.size());
    result.coefficients.assign(reports.size(), uniform);
  } else {
    for (const ClientReport& report : reports) {
      result.coefficients.push_back(report.accuracy / sum);
    }
  }
  return result;
}

ModelParameters average_weights(const std::vector<ModelParameters>& models,
                                const std::vector<double>& coefficients) {
  if (models.empty()) {
    throw std::invalid_argument("average_weights: no models");
  }
  if (coefficients.size() != models.size()) {
    throw std::invalid_argument("average_weights: " +
                                std::to_string(coefficients.size()) +
                                " coefficients for " + std::to_string(models.size()) +
                                " models");
  }
  double sum = 0.0;
  for (double c : coefficients) {
    if (!std::isfinite(c)) {
      throw std::invalid_argument("average_weights: non-finite coefficient");
    }
    sum += c;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("average_weights: coefficients sum to " +
                                std::to_string(sum) + ", expected 1");
  }
  const ModelParameters& anchor = models.front();
  for (std::size_t m = 1; m < models.size(); ++m) {
    for (std::size_t k = 0; k < anchor.layer_count(); ++k) {
      if (models[m].layer_count() != anchor.layer_count() ||
          !models[m].layers[k].weights.same_shape(anchor.layers[k].weights) ||
          models[m].layers[k].biases.size() != anchor.layers[k].biases.size()) {
        throw std::invalid_argument("average_weights: model " + std::to_string(m) +
                                    " disagrees with model 0 at layer " +
                                    std::to_string(k));
      }
    }
  }
  // Anchor-plus-deltas keeps a combination of identical models exactly equal
  // to the anchor, which the synchronous strategy's invariants rely on.
  ModelParameters result = anchor;
  for (std::size_t k = 0; k < anchor.layer_count(); ++k) {
    auto& w_out = result.layers[k].weights.data();
    const auto& w_anchor = anchor.layers[k].weights.data();
    for (std::size_t idx = 0; idx < w_out.size(); ++idx) {
      double delta = 0.0;
      for (std::size_t m = 0; m < models.size(); ++m) {
        delta += coefficients[m] *
                 (models[m].layers[k].weights.data()[idx] - w_anchor[idx]);
      }
      w_out[idx] = w_anchor[idx] + delta;
    }
    auto& b_out = result.layers[k].biases;
    const auto& b_anchor = anchor.layers[k].biases;
    for (std::size_t idx = 0; idx < b_out.size(); ++idx) {
      double delta = 0.0;
      for (std::size_t m = 0; m < models.size(); ++m) {
        delta += coefficients[m] * (models[m].layers[k].biases[idx] - b_anchor[idx]);
      }
      b_out[idx] = b_anchor[idx] + delta;
    }
  }
  return result;
}

ModelParameters update_weights(const ModelParameters& current,
                               const ModelParameters& averaged,
                               const LayerPartition& partition) {
  if (!current.same_shape(averaged)) {
    throw std::invalid_argument("update_weights: model shapes disagree");
  }
  if (partition.kind == PartitionKind::kDeep) {
    return averaged;
  }
  if (partition.boundary < 1 || partition.boundary >= current.layer_count()) {
    throw std::invalid_argument("update_weights: shallow boundary " +
                                std::to_string(partition.boundary) +
                                " must lie in [1, " +
                                std::to_string(current.layer_count()) + ")");
  }
  ModelParameters result = current;
  for (std::size_t k = 0; k < partition.boundary; ++k) {
    result.layers[k] = averaged.layers[k];
  }
  return result;
}

namespace {

void check_training_args(const ModelParameters& params, const Dataset& data,
                         int epochs, double lr, int batch_size, const char* where) {
  std::string prefix(where);
  if (epochs < 1) {
    throw std::invalid_argument(prefix + ": epochs must be >= 1");
  }
  if (batch_size < 1) {
    throw std::invalid_argument(prefix + ": batch_size must be >= 1");
  }
  if (!std::isfinite(lr) || lr < 0.0) {
    throw std::invalid_argument(prefix + ": learning rate must be finite and >= 0");
  }
  if (data.size() == 0) {
    throw std::invalid_argument(prefix + ": empty dataset");
  }
  if (data.dim() != params.input_size()) {
    throw std::invalid_argument(prefix + ": dataset has " +
                                std::to_string(data.dim()) +
                                " features, model expects " +
                                std::to_string(params.input_size()));
  }
}

Matrix full_matrix(const Dataset& data) { return data.features; }

void gather_rows(const Dataset& data, const std::vector<std::size_t>& order,
                 std::size_t from, std::size_t to, Matrix& batch,
                 std::vector<int>& labels) {
  batch = Matrix(to - from, data.dim());
  labels.clear();
  labels.reserve(to - from);
  for (std::size_t i = from; i < to; ++i) {
    std::size_t row = order[i];
    for (std::size_t c = 0; c < data.dim(); ++c) {
      batch(i - from, c) = data.features(row, c);
    }
    labels.push_back(data.labels[row]);
  }
}

}  // namespace

LocalTrainResult local_train(const ModelParameters& params, const Dataset& fold,
                             int epochs, double lr, int batch_size, RngStream& rng) {
  check_training_args(params, fold, epochs, lr, batch_size, "local_train");

  LossSpec bce_spec;
  bce_spec.mode = LossMode::kBceOnly;

  LocalTrainResult result;
  result.params = params;
  Matrix full = full_matrix(fold);

  std::vector<std::size_t> order(fold.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix batch;
  std::vector<int> labels;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    result.epoch_losses.push_back(
        loss_components(result.params, full, fold.labels, bce_spec).total);
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      gather_rows(fold, order, start, stop, batch, labels);
      auto [loss, grads] =
          compute_gradients(result.params, batch, labels, bce_spec, &rng);
      (void)loss;
      result.params = sgd_step(result.params, grads, lr);
    }
  }

  std::vector<PredictionDistribution> preds = predict(result.params, full);
  result.report.accuracy = classification_accuracy(preds, fold.labels);
  result.report.loss = bce_loss(preds, fold.labels);
  result.report.examples_seen =
      fold.size() * static_cast<std::size_t>(epochs);
  return result;
}

MutualUpdateResult mutual_update(const ModelParameters& params, const Dataset& common,
                                 const std::vector<std::vector<PredictionDistribution>>& peers,
                                 const StrategySpec& spec, RngStream& rng) {
  check_training_args(params, common, spec.mutual_epochs, spec.lr, spec.batch_size,
                      "mutual_update");
  if (peers.empty()) {
    throw std::invalid_argument("mutual_update: at least one peer is required");
  }
  for (std::size_t j = 0; j < peers.size(); ++j) {
    if (peers[j].size() != common.size()) {
      throw std::invalid_argument("mutual_update: peer " + std::to_string(j) +
                                  " supplied " + std::to_string(peers[j].size()) +
                                  " predictions for " + std::to_string(common.size()) +
                                  " common examples");
    }
  }
  if (!std::isfinite(spec.kl_coefficient) || spec.kl_coefficient < 0.0) {
    throw std::invalid_argument(
        "mutual_update: kl_coefficient must be finite and >= 0");
  }

  LossSpec full_spec;
  full_spec.mode = LossMode::kBcePlusKld;
  full_spec.peer_predictions = peers;
  full_spec.kl_direction = spec.kl_direction;
  full_spec.kl_coefficient = spec.kl_coefficient;

  MutualUpdateResult result;
  result.params = params;
  Matrix full = full_matrix(common);

  std::vector<std::size_t> order(common.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix batch;
  std::vector<int> labels;
  LossSpec batch_spec = full_spec;
  for (int epoch = 0; epoch < spec.mutual_epochs; ++epoch) {
    result.trace.push_back(
        loss_components(result.params, full, common.labels, full_spec));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(spec.batch_size)) {
      std::size_t stop = std::min(order.size(),
                                  start + static_cast<std::size_t>(spec.batch_size));
      gather_rows(common, order, start, stop, batch, labels);
      for (std::size_t j = 0; j < peers.size(); ++j) {
        batch_spec.peer_predictions[j].resize(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
          batch_spec.peer_predictions[j][i - start] = peers[j][order[i]];
        }
      }
      auto [loss, grads] =
          compute_gradients(result.params, batch, labels, batch_spec, &rng);
      (void)loss;
      result.params = sgd_step(result.params, grads, spec.lr);
    }
  }
  return result;
}

}  // namespace fedsim
