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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"
#include "fedsim/protocols.hpp"

namespace fedsim {

// What a message on the (simulated) wire costs. Weights and predictions are
// accounted at 4 bytes per value; a metrics report is a fixed 8 bytes.
enum class MessageKind { kFullWeights, kShallowWeights, kPredictions, kMetrics };

// payload = number of parameters (weight kinds) or prediction values.
std::uint64_t account_communication(MessageKind kind, std::size_t payload);

struct EvalResult {
  double accuracy = 0.0;
  double bce = 0.0;
};

// Deterministic eval-mode metrics on a dataset; rejects empty data. Callers
// are responsible for feeding features scaled like the training data.
EvalResult evaluate(const ModelParameters& params, const Dataset& dataset);

enum class RoundEvent { kNone, kShallowShare, kDeepShare, kMutualExchange };

struct GlobalMetrics {
  double accuracy = 0.0;
  double loss = 0.0;
};

struct ClientRoundMetrics {
  std::vector<double> train_loss_curve;  // per-epoch, local phase
  double train_loss = 0.0;               // end of local training, on the fold
  double fold_accuracy = 0.0;
  // Mutual-learning strategy only; empty otherwise.
  std::optional<double> common_accuracy;        // after the mutual phase
  std::optional<double> bce_term;               // at mutual-phase start
  std::optional<double> kld_term;               // at mutual-phase start
  std::vector<LossBreakdown> mutual_trace;      // per mutual epoch
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
};

struct RoundRecord {
  int round = 0;
  std::vector<ClientRoundMetrics> clients;
  RoundEvent event = RoundEvent::kNone;
  std::optional<int> layer_boundary;       // shallow shares only
  std::optional<GlobalMetrics> global;     // when the strategy maintains one
};

struct CommRow {
  int round = 0;
  int client = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
};

struct CommLedger {
  std::vector<CommRow> rows;
  std::uint64_t total_sent = 0;
  std::uint64_t total_received = 0;
};

struct SimulationResult {
  std::vector<RoundRecord> records;
  CommLedger ledger;
  // End-of-protocol states (after the final round's synchronisation).
  std::vector<ModelParameters> final_clients;
  std::optional<ModelParameters> final_global;
  // Held-out metrics of each client's last-trained model: end of the final
  // local phase for weight-sharing strategies, end of the final mutual phase
  // for mutual learning.
  std::vector<EvalResult> holdout;
  GlobalMetrics initial_global;
};

// Called after every completed round with the round's record, the clients'
// current parameters and the global model when one is maintained.
using RoundObserver =
    std::function<void(const RoundRecord&, const std::vector<ModelParameters>&,
                       const ModelParameters*)>;

// Runs the full protocol described by the config. Deterministic per seed:
// identical configs produce identical results no matter how many worker
// threads execute the client phases. Throws std::runtime_error on invalid
// configs, fold-budget violations, or a non-finite client state (the message
// names the client and round).
SimulationResult run_simulation(const SimulationConfig& config,
                                const RoundObserver& observer = {});

// Writes history.csv, events.jsonl, comm.csv, config_resolved.ini and
// final_metrics.csv into `directory` (plus checkpoints/ with final models,
// and epoch_trace.csv when the config asks for the verbose trace). Creates
// the directory; byte-identical output for identical results.
void write_outputs(const SimulationResult& result, const SimulationConfig& config,
                   const std::string& directory);

}  // namespace fedsim
