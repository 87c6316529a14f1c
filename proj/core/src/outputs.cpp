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

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fedsim/simulation.hpp"
#include "fedsim/text.hpp"

namespace fedsim {

namespace {

namespace fs = std::filesystem;

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_outputs: cannot open " + path.string());
  }
  return out;
}

std::string event_name(RoundEvent event) {
  switch (event) {
    case RoundEvent::kNone:
      return "none";
    case RoundEvent::kShallowShare:
      return "shallow_share";
    case RoundEvent::kDeepShare:
      return "deep_share";
    case RoundEvent::kMutualExchange:
      return "mutual_exchange";
  }
  throw std::logic_error("event_name: unknown event");
}

void write_history(const SimulationResult& result, const fs::path& path) {
  std::ofstream out = open_for_write(path);
  out << "round,client,train_loss,fold_acc,common_acc,bce_term,kld_term,"
         "bytes_sent,bytes_received\n";
  auto optional_cell = [](const std::optional<double>& value) {
    return value ? format_double(*value) : std::string();
  };
  for (const RoundRecord& record : result.records) {
    for (std::size_t c = 0; c < record.clients.size(); ++c) {
      const ClientRoundMetrics& m = record.clients[c];
      out << record.round << ',' << c << ',' << format_double(m.train_loss) << ','
          << format_double(m.fold_accuracy) << ',' << optional_cell(m.common_accuracy)
          << ',' << optional_cell(m.bce_term) << ',' << optional_cell(m.kld_term)
          << ',' << m.bytes_sent << ',' << m.bytes_received << '\n';
    }
  }
}

void write_events(const SimulationResult& result, const fs::path& path) {
  std::ofstream out = open_for_write(path);
  for (const RoundRecord& record : result.records) {
    nlohmann::ordered_json event;
    event["round"] = record.round;
    event["kind"] = event_name(record.event);
    if (record.layer_boundary) {
      event["layer_boundary"] = *record.layer_boundary;
    }
    if (record.global) {
      event["global_accuracy"] = record.global->accuracy;
      event["global_loss"] = record.global->loss;
    }
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
    for (const ClientRoundMetrics& m : record.clients) {
      sent += m.bytes_sent;
      received += m.bytes_received;
    }
    event["bytes_sent"] = sent;
    event["bytes_received"] = received;
    out << event.dump() << '\n';
  }
}

void write_comm(const SimulationResult& result, const fs::path& path) {
  std::ofstream out = open_for_write(path);
  out << "round,client,bytes_sent,bytes_received\n";
  for (const CommRow& row : result.ledger.rows) {
    out << row.round << ',' << row.client << ',' << row.bytes_sent << ','
        << row.bytes_received << '\n';
  }
}

void write_final_metrics(const SimulationResult& result, const fs::path& path) {
  std::ofstream out = open_for_write(path);
  out << "client,holdout_acc,holdout_bce\n";
  for (std::size_t c = 0; c < result.holdout.size(); ++c) {
    out << c << ',' << format_double(result.holdout[c].accuracy) << ','
        << format_double(result.holdout[c].bce) << '\n';
  }
}

void write_epoch_trace(const SimulationResult& result, const fs::path& path) {
  std::ofstream out = open_for_write(path);
  out << "round,client,phase,epoch,loss,bce,kld\n";
  for (const RoundRecord& record : result.records) {
    for (std::size_t c = 0; c < record.clients.size(); ++c) {
      const ClientRoundMetrics& m = record.clients[c];
      for (std::size_t e = 0; e < m.train_loss_curve.size(); ++e) {
        out << record.round << ',' << c << ",local," << e << ','
            << format_double(m.train_loss_curve[e]) << ','
            << format_double(m.train_loss_curve[e]) << ",\n";
      }
      for (std::size_t e = 0; e < m.mutual_trace.size(); ++e) {
        const LossBreakdown& b = m.mutual_trace[e];
        out << record.round << ',' << c << ",mutual," << e << ','
            << format_double(b.total) << ',' << format_double(b.bce) << ','
            << format_double(b.kld) << '\n';
      }
    }
  }
}

void write_checkpoints(const SimulationResult& result, const fs::path& directory) {
  fs::create_directories(directory);
  for (std::size_t c = 0; c < result.final_clients.size(); ++c) {
    save_model(result.final_clients[c],
               (directory / ("client_" + std::to_string(c) + ".model")).string());
  }
  if (result.final_global) {
    save_model(*result.final_global, (directory / "global.model").string());
  }
}

}  // namespace

void write_outputs(const SimulationResult& result, const SimulationConfig& config,
                   const std::string& directory) {
  fs::path root(directory);
  fs::create_directories(root);
  write_history(result, root / "history.csv");
  write_events(result, root / "events.jsonl");
  write_comm(result, root / "comm.csv");
  {
    std::ofstream out = open_for_write(root / "config_resolved.ini");
    out << serialize_config(config);
  }
  write_final_metrics(result, root / "final_metrics.csv");
  write_checkpoints(result, root / "checkpoints");
  if (config.run.verbose_trace) {
    write_epoch_trace(result, root / "epoch_trace.csv");
  }
}

}  // namespace fedsim
