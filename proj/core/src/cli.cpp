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

#include "fedsim/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedsim/config.hpp"
#include "fedsim/simulation.hpp"
#include "fedsim/text.hpp"

namespace fedsim {

namespace {

int report_issues(const std::vector<std::string>& issues, const std::string& path) {
  std::cerr << "config " << path << " has " << issues.size()
            << (issues.size() == 1 ? " problem:\n" : " problems:\n");
  for (const std::string& issue : issues) {
    std::cerr << "  - " << issue << '\n';
  }
  return 1;
}

int command_validate(const std::string& config_path) {
  ConfigLoadResult loaded = load_config(config_path);
  if (!loaded.issues.empty()) {
    return report_issues(loaded.issues, config_path);
  }
  std::vector<std::string> issues = validate_feasibility(loaded.config);
  if (!issues.empty()) {
    return report_issues(issues, config_path);
  }
  std::cout << "config OK\n";
  return 0;
}

int command_run(const std::string& config_path, const ConfigOverrides& overrides) {
  ConfigLoadResult loaded = load_config(config_path, overrides);
  if (!loaded.issues.empty()) {
    return report_issues(loaded.issues, config_path);
  }
  {
    std::vector<std::string> issues = validate_feasibility(loaded.config);
    if (!issues.empty()) {
      return report_issues(issues, config_path);
    }
  }
  const SimulationConfig& config = loaded.config;

  RoundObserver observer;
  if (config.run.checkpoint_every > 0) {
    int every = config.run.checkpoint_every;
    std::string out_dir = config.run.out;
    observer = [every, out_dir](const RoundRecord& record,
                                const std::vector<ModelParameters>& clients,
                                const ModelParameters* global) {
      if ((record.round + 1) % every != 0) return;
      namespace fs = std::filesystem;
      fs::path dir = fs::path(out_dir) / "checkpoints" /
                     ("round_" + std::to_string(record.round));
      fs::create_directories(dir);
      for (std::size_t c = 0; c < clients.size(); ++c) {
        save_model(clients[c],
                   (dir / ("client_" + std::to_string(c) + ".model")).string());
      }
      if (global != nullptr) {
        save_model(*global, (dir / "global.model").string());
      }
    };
  }

  SimulationResult result = run_simulation(config, observer);
  write_outputs(result, config, config.run.out);

  double min_acc = 1.0;
  double max_acc = 0.0;
  double sum_acc = 0.0;
  for (const EvalResult& eval : result.holdout) {
    min_acc = std::min(min_acc, eval.accuracy);
    max_acc = std::max(max_acc, eval.accuracy);
    sum_acc += eval.accuracy;
  }
  double mean_acc =
      result.holdout.empty() ? 0.0
                             : sum_acc / static_cast<double>(result.holdout.size());

  std::cout << "strategy: " << strategy_name(config.strategy.kind) << "\n"
            << "clients: " << config.run.clients
            << "  rounds: " << config.run.rounds << "  seed: " << config.run.seed
            << "\n"
            << "initial global: acc " << format_double(result.initial_global.accuracy)
            << "  bce " << format_double(result.initial_global.loss) << "\n"
            << "holdout accuracy: min " << format_double(min_acc) << "  mean "
            << format_double(mean_acc) << "  max " << format_double(max_acc) << "\n"
            << "bytes: sent " << result.ledger.total_sent << "  received "
            << result.ledger.total_received << "\n"
            << "outputs: " << config.run.out << "\n";
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  CLI::App app{"Federated learning strategy simulator"};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<std::string> out;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a simulation");
  run_cmd->add_option("config", run_config, "Configuration file")->required();
  run_cmd->add_option("--seed", seed, "Override run.seed");
  run_cmd->add_option("--strategy", strategy,
                      "Override strategy.kind (vanilla, async, dml)");
  run_cmd->add_option("--out", out, "Override run.out");

  std::string validate_config_path;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Check a configuration without running");
  validate_cmd->add_option("config", validate_config_path, "Configuration file")
      ->required();

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("fedsim");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  argv.reserve(argv_storage.size());
  for (std::string& arg : argv_storage) {
    argv.push_back(arg.data());
  }

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& error) {
    return app.exit(error);
  }

  try {
    if (run_cmd->parsed()) {
      ConfigOverrides overrides;
      overrides.seed = seed;
      overrides.strategy = strategy;
      overrides.out = out;
      return command_run(run_config, overrides);
    }
    return command_validate(validate_config_path);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return 1;
  }
}

}  // namespace fedsim
