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
#include <optional>
#include <string>
#include <vector>

#include "fedsim/protocols.hpp"

namespace fedsim {

struct ModelConfig {
  std::vector<int> hidden = {32, 16};
  std::vector<double> dropout = {0.2, 0.2};
};

enum class DataSource { kSynthetic, kCsv };

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  std::string csv_path;
  int synthetic_n = 2000;
  int synthetic_dim = 2;
  double synthetic_separation = 6.0;
  double holdout_fraction = 0.2;
  bool normalize = true;
};

struct RunConfig {
  int clients = 0;
  int rounds = 0;
  std::uint64_t seed = 42;
  std::string out = "out";
  int threads = 1;
  bool verbose_trace = false;
  // Write per-round model checkpoints every N rounds; 0 disables them.
  int checkpoint_every = 0;
};

struct SimulationConfig {
  ModelConfig model;
  DataConfig data;
  StrategySpec strategy;
  RunConfig run;
};

// Command-line overrides applied between parsing and validation.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<std::string> out;
};

struct ConfigLoadResult {
  SimulationConfig config;
  // Empty when the file parsed and validated cleanly; otherwise one entry
  // per problem, so a bad file reports everything at once.
  std::vector<std::string> issues;
};

// Flat key/value file with [model] / [data] / [strategy] / [run] sections.
// Every key has a default except run.clients, run.rounds, strategy.kind and
// data.source.
ConfigLoadResult load_config(const std::string& path,
                             const ConfigOverrides& overrides = {});

// Structural checks on an already-built config (ranges, presence, section
// cross-checks). Returns one message per violation.
std::vector<std::string> validate_config(const SimulationConfig& config);

// Checks that need the dataset: loads/sizes it and verifies the fold budget
// is satisfiable after the holdout split.
std::vector<std::string> validate_feasibility(const SimulationConfig& config);

// Full echo of a resolved config, defaults included, in the same file
// format. Byte-deterministic; reparsing it yields an equivalent config.
std::string serialize_config(const SimulationConfig& config);

std::string strategy_name(StrategyKind kind);
std::optional<StrategyKind> parse_strategy_name(const std::string& name);

}  // namespace fedsim
