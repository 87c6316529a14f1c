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

#include "fedsim/simulation.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include "fedsim/folds.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

std::uint64_t account_communication(MessageKind kind, std::size_t payload) {
  switch (kind) {
    case MessageKind::kFullWeights:
    case MessageKind::kShallowWeights:
    case MessageKind::kPredictions:
      return static_cast<std::uint64_t>(payload) * 4;
    case MessageKind::kMetrics:
      return 8;
  }
  throw std::logic_error("account_communication: unknown message kind");
}

EvalResult evaluate(const ModelParameters& params, const Dataset& dataset) {
  if (dataset.size() == 0) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  std::vector<PredictionDistribution> preds = predict(params, dataset.features);
  EvalResult result;
  result.accuracy = classification_accuracy(preds, dataset.labels);
  result.bce = bce_loss(preds, dataset.labels);
  return result;
}

namespace {

// Runs `work(c)` for every client index. Client results must be written to
// per-index slots; each client draws randomness only from its own derived
// stream, so the partitioning across threads cannot change any result.
void for_each_client(std::size_t count, int threads,
                     const std::function<void(std::size_t)>& work) {
  std::size_t worker_count =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (worker_count <= 1) {
    for (std::size_t c = 0; c < count; ++c) work(c);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(worker_count);
  for (std::size_t t = 0; t < worker_count; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t c = t; c < count; c += worker_count) {
        try {
          work(c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& worker : pool) worker.join();
  for (std::size_t c = 0; c < count; ++c) {
    if (errors[c]) std::rethrow_exception(errors[c]);
  }
}

void require_finite(const ModelParameters& params, int round, std::size_t client,
                    const char* phase) {
  if (!all_finite(params)) {
    throw std::runtime_error("round " + std::to_string(round) + ", client " +
                             std::to_string(client) +
                             ": non-finite parameters after " + phase);
  }
}

}  // namespace

SimulationResult run_simulation(const SimulationConfig& config,
                                const RoundObserver& observer) {
  {
    std::vector<std::string> issues = validate_config(config);
    if (!issues.empty()) {
      std::string joined = "invalid config";
      for (const std::string& issue : issues) joined += "; " + issue;
      throw std::runtime_error(joined);
    }
  }
  const StrategySpec& strategy = config.strategy;
  auto clients = static_cast<std::size_t>(config.run.clients);
  int rounds = config.run.rounds;
  std::uint64_t seed = config.run.seed;

  Dataset raw;
  if (config.data.source == DataSource::kCsv) {
    raw = load_csv(config.data.csv_path);
  } else {
    raw = generate_synthetic(static_cast<std::size_t>(config.data.synthetic_n),
                             static_cast<std::size_t>(config.data.synthetic_dim),
                             config.data.synthetic_separation,
                             derive_seed(seed, "data"));
  }

  Dataset train;
  Dataset holdout;
  if (config.data.holdout_fraction > 0.0) {
    RngStream holdout_rng(derive_seed(seed, "holdout"));
    std::tie(train, holdout) =
        split_holdout(raw, config.data.holdout_fraction, holdout_rng);
  } else {
    train = raw;
  }
  if (holdout.size() == 0) {
    // Degenerate split: fall back to in-sample metrics rather than failing.
    holdout = train;
  }
  if (config.data.normalize) {
    NormalizationStats stats;
    std::tie(train, stats) = normalize(train);
    holdout = apply_normalization(holdout, stats);
  }

  FoldSchedule schedule =
      stratified_kfold(train, clients, static_cast<std::size_t>(rounds),
                       derive_seed(seed, "folds"));

  RngStream init_rng(derive_seed(seed, "init"));
  ModelParameters global = make_model(train.dim(), config.model.hidden,
                                      config.model.dropout, init_rng);
  {
    Dataset seed_fold = subset(train, schedule.pop());
    RngStream global_init_rng(derive_seed(seed, "global-init"));
    global = local_train(global, seed_fold, strategy.local_epochs, strategy.lr,
                         strategy.batch_size, global_init_rng)
                 .params;
    require_finite(global, -1, 0, "initial training");
  }

  SimulationResult result;
  {
    EvalResult initial = evaluate(global, holdout);
    result.initial_global = GlobalMetrics{initial.accuracy, initial.bce};
  }

  std::vector<ModelParameters> params(clients, global);
  std::size_t boundary =
      strategy.shallow_boundary > 0
          ? static_cast<std::size_t>(strategy.shallow_boundary)
          : default_boundary(global.layer_count());
  std::size_t full_payload = global.parameter_count();
  std::size_t shallow_payload = global.parameter_count_below(boundary);

  std::optional<ModelParameters> current_global;
  std::vector<ModelParameters> last_trained;

  for (int round = 0; round < rounds; ++round) {
    std::vector<Dataset> folds;
    folds.reserve(clients);
    for (std::size_t c = 0; c < clients; ++c) {
      folds.push_back(subset(train, schedule.pop()));
    }
    Dataset shared = subset(train, schedule.pop());

    RoundRecord record;
    record.round = round;
    record.clients.resize(clients);

    // Local phase: every client trains on its own fresh fold.
    std::vector<LocalTrainResult> locals(clients);
    for_each_client(clients, config.run.threads, [&](std::size_t c) {
      RngStream local_rng(derive_seed(seed, "local",
                                      static_cast<std::uint64_t>(round), c));
      locals[c] = local_train(params[c], folds[c], strategy.local_epochs,
                              strategy.lr, strategy.batch_size, local_rng);
    });
    for (std::size_t c = 0; c < clients; ++c) {
      require_finite(locals[c].params, round, c, "local training");
      params[c] = std::move(locals[c].params);
      ClientRoundMetrics& metrics = record.clients[c];
      metrics.train_loss_curve = locals[c].epoch_losses;
      metrics.train_loss = locals[c].report.loss;
      metrics.fold_accuracy = locals[c].report.accuracy;
    }
    if (round == rounds - 1 && strategy.kind != StrategyKind::kMutualLearning) {
      last_trained = params;
    }

    // Synchronisation phase.
    switch (strategy.kind) {
      case StrategyKind::kVanilla: {
        std::vector<double> uniform(clients, 1.0 / static_cast<double>(clients));
        ModelParameters averaged = average_weights(params, uniform);
        std::uint64_t each = account_communication(MessageKind::kFullWeights,
                                                   full_payload);
        for (std::size_t c = 0; c < clients; ++c) {
          record.clients[c].bytes_sent = each;
          record.clients[c].bytes_received = each;
          params[c] = averaged;
        }
        record.event = RoundEvent::kDeepShare;
        EvalResult shared_eval = evaluate(averaged, shared);
        record.global = GlobalMetrics{shared_eval.accuracy, shared_eval.bce};
        current_global = std::move(averaged);
        break;
      }
      case StrategyKind::kAsyncWeights: {
        std::vector<ClientReport> reports;
        reports.reserve(clients);
        for (const LocalTrainResult& local : locals) {
          reports.push_back(local.report);
        }
        WeightingResult weighting = preprocess_weights(params, reports);
        ModelParameters averaged = average_weights(params, weighting.coefficients);
        PartitionKind kind =
            select_partition(round, strategy.delta, strategy.warmup);
        LayerPartition partition{kind, boundary};
        std::size_t payload =
            kind == PartitionKind::kDeep ? full_payload : shallow_payload;
        MessageKind message = kind == PartitionKind::kDeep
                                  ? MessageKind::kFullWeights
                                  : MessageKind::kShallowWeights;
        std::uint64_t weight_bytes = account_communication(message, payload);
        std::uint64_t metric_bytes =
            account_communication(MessageKind::kMetrics, 1);
        for (std::size_t c = 0; c < clients; ++c) {
          record.clients[c].bytes_sent = weight_bytes + metric_bytes;
          record.clients[c].bytes_received = weight_bytes;
          params[c] = update_weights(params[c], averaged, partition);
        }
        if (kind == PartitionKind::kDeep) {
          record.event = RoundEvent::kDeepShare;
        } else {
          record.event = RoundEvent::kShallowShare;
          record.layer_boundary = static_cast<int>(boundary);
        }
        // The server keeps its own model fresh: fold in the aggregate, then
        // retrain it on the round's dedicated fold.
        global = update_weights(global, averaged, partition);
        RngStream global_rng(
            derive_seed(seed, "global", static_cast<std::uint64_t>(round)));
        LocalTrainResult retrained =
            local_train(global, shared, strategy.local_epochs, strategy.lr,
                        strategy.batch_size, global_rng);
        if (!all_finite(retrained.params)) {
          throw std::runtime_error("round " + std::to_string(round) +
                                   ": non-finite global model after retraining");
        }
        global = std::move(retrained.params);
        record.global =
            GlobalMetrics{retrained.report.accuracy, retrained.report.loss};
        current_global = global;
        break;
      }
      case StrategyKind::kMutualLearning: {
        std::size_t sample_count = shared.size();
        std::vector<std::vector<PredictionDistribution>> broadcast(clients);
        for_each_client(clients, config.run.threads, [&](std::size_t c) {
          broadcast[c] = predict(params[c], shared.features);
        });
        std::uint64_t sent =
            account_communication(MessageKind::kPredictions, sample_count);
        std::uint64_t received = account_communication(
            MessageKind::kPredictions, sample_count * clients);
        std::vector<MutualUpdateResult> mutual(clients);
        for_each_client(clients, config.run.threads, [&](std::size_t c) {
          std::vector<std::vector<PredictionDistribution>> peers;
          peers.reserve(clients - 1);
          for (std::size_t other = 0; other < clients; ++other) {
            if (other != c) peers.push_back(broadcast[other]);
          }
          RngStream mutual_rng(derive_seed(seed, "mutual",
                                           static_cast<std::uint64_t>(round), c));
          mutual[c] = mutual_update(params[c], shared, peers, strategy, mutual_rng);
        });
        for (std::size_t c = 0; c < clients; ++c) {
          require_finite(mutual[c].params, round, c, "mutual update");
          params[c] = std::move(mutual[c].params);
          ClientRoundMetrics& metrics = record.clients[c];
          metrics.bytes_sent = sent;
          metrics.bytes_received = received;
          metrics.bce_term = mutual[c].trace.front().bce;
          metrics.kld_term = mutual[c].trace.front().kld;
          metrics.mutual_trace = std::move(mutual[c].trace);
          metrics.common_accuracy = classification_accuracy(
              predict(params[c], shared.features), shared.labels);
        }
        record.event = RoundEvent::kMutualExchange;
        if (round == rounds - 1) {
          last_trained = params;
        }
        break;
      }
    }

    for (std::size_t c = 0; c < clients; ++c) {
      result.ledger.rows.push_back(CommRow{round, static_cast<int>(c),
                                           record.clients[c].bytes_sent,
                                           record.clients[c].bytes_received});
      result.ledger.total_sent += record.clients[c].bytes_sent;
      result.ledger.total_received += record.clients[c].bytes_received;
    }
    result.records.push_back(std::move(record));
    if (observer) {
      observer(result.records.back(), params,
               current_global ? &*current_global : nullptr);
    }
  }

  result.final_clients = params;
  result.final_global = std::move(current_global);
  result.holdout.reserve(clients);
  for (const ModelParameters& model : last_trained) {
    result.holdout.push_back(evaluate(model, holdout));
  }
  return result;
}

}  // namespace fedsim
