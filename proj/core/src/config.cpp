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

#include "fedsim/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fedsim/dataset.hpp"
#include "fedsim/folds.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/text.hpp"

namespace fedsim {

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kVanilla:
      return "vanilla";
    case StrategyKind::kAsyncWeights:
      return "async";
    case StrategyKind::kMutualLearning:
      return "dml";
  }
  throw std::logic_error("strategy_name: unknown kind");
}

std::optional<StrategyKind> parse_strategy_name(const std::string& name) {
  if (name == "vanilla") return StrategyKind::kVanilla;
  if (name == "async") return StrategyKind::kAsyncWeights;
  if (name == "dml") return StrategyKind::kMutualLearning;
  return std::nullopt;
}

namespace {

std::string direction_name(KlDirection direction) {
  return direction == KlDirection::kForward ? "forward" : "reverse";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string current;
  for (char ch : text) {
    if (ch == ',') {
      items.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  items.push_back(trim(current));
  return items;
}

class Parser {
 public:
  Parser(SimulationConfig& config, std::vector<std::string>& issues)
      : config_(config), issues_(issues) {}

  void consume(const std::string& section, const std::string& key,
               const std::string& value, int line) {
    std::string full = section + "." + key;
    seen_.insert(full);
    if (full == "model.hidden") {
      parse_int_list(full, value, line, 1, config_.model.hidden);
    } else if (full == "model.dropout") {
      parse_double_list(full, value, line, config_.model.dropout);
    } else if (full == "data.source") {
      if (value == "synthetic") {
        config_.data.source = DataSource::kSynthetic;
      } else if (value == "csv") {
        config_.data.source = DataSource::kCsv;
      } else {
        issue(line, full + ": expected 'synthetic' or 'csv', got '" + value + "'");
      }
    } else if (full == "data.csv_path") {
      config_.data.csv_path = value;
    } else if (full == "data.synthetic_n") {
      parse_int(full, value, line, config_.data.synthetic_n);
    } else if (full == "data.synthetic_dim") {
      parse_int(full, value, line, config_.data.synthetic_dim);
    } else if (full == "data.synthetic_separation") {
      parse_real(full, value, line, config_.data.synthetic_separation);
    } else if (full == "data.holdout_fraction") {
      parse_real(full, value, line, config_.data.holdout_fraction);
    } else if (full == "data.normalize") {
      parse_bool(full, value, line, config_.data.normalize);
    } else if (full == "strategy.kind") {
      if (auto kind = parse_strategy_name(value)) {
        config_.strategy.kind = *kind;
      } else {
        issue(line, full + ": unknown strategy '" + value +
                        "' (expected vanilla, async, or dml)");
      }
    } else if (full == "strategy.delta") {
      parse_int(full, value, line, config_.strategy.delta);
    } else if (full == "strategy.warmup") {
      parse_int(full, value, line, config_.strategy.warmup);
    } else if (full == "strategy.local_epochs") {
      parse_int(full, value, line, config_.strategy.local_epochs);
    } else if (full == "strategy.mutual_epochs") {
      parse_int(full, value, line, config_.strategy.mutual_epochs);
    } else if (full == "strategy.lr") {
      parse_real(full, value, line, config_.strategy.lr);
    } else if (full == "strategy.batch_size") {
      parse_int(full, value, line, config_.strategy.batch_size);
    } else if (full == "strategy.kl_direction") {
      if (value == "forward") {
        config_.strategy.kl_direction = KlDirection::kForward;
      } else if (value == "reverse") {
        config_.strategy.kl_direction = KlDirection::kReverse;
      } else {
        issue(line, full + ": expected 'forward' or 'reverse', got '" + value + "'");
      }
    } else if (full == "strategy.kl_coefficient") {
      parse_real(full, value, line, config_.strategy.kl_coefficient);
    } else if (full == "strategy.shallow_boundary") {
      parse_int(full, value, line, config_.strategy.shallow_boundary);
    } else if (full == "run.clients") {
      parse_int(full, value, line, config_.run.clients);
    } else if (full == "run.rounds") {
      parse_int(full, value, line, config_.run.rounds);
    } else if (full == "run.seed") {
      unsigned long long seed = 0;
      if (parse_uint64(value, seed)) {
        config_.run.seed = seed;
      } else {
        issue(line, full + ": '" + value + "' is not an unsigned integer");
      }
    } else if (full == "run.out") {
      config_.run.out = value;
    } else if (full == "run.threads") {
      parse_int(full, value, line, config_.run.threads);
    } else if (full == "run.verbose_trace") {
      parse_bool(full, value, line, config_.run.verbose_trace);
    } else if (full == "run.checkpoint_every") {
      parse_int(full, value, line, config_.run.checkpoint_every);
    } else {
      issue(line, "unknown key '" + full + "'");
    }
  }

  bool saw(const std::string& full_key) const { return seen_.count(full_key) > 0; }

  void issue(int line, const std::string& message) {
    issues_.push_back("line " + std::to_string(line) + ": " + message);
  }

 private:
  void parse_int(const std::string& full, const std::string& value, int line,
                 int& out) {
    long long parsed = 0;
    if (!parse_int64(value, parsed) || parsed < std::numeric_limits<int>::min() ||
        parsed > std::numeric_limits<int>::max()) {
      issue(line, full + ": '" + value + "' is not an integer");
      return;
    }
    out = static_cast<int>(parsed);
  }

  void parse_real(const std::string& full, const std::string& value, int line,
                  double& out) {
    double parsed = 0.0;
    if (!parse_double(value, parsed)) {
      issue(line, full + ": '" + value + "' is not a number");
      return;
    }
    out = parsed;
  }

  void parse_bool(const std::string& full, const std::string& value, int line,
                  bool& out) {
    if (value == "true") {
      out = true;
    } else if (value == "false") {
      out = false;
    } else {
      issue(line, full + ": expected 'true' or 'false', got '" + value + "'");
    }
  }

  void parse_int_list(const std::string& full, const std::string& value, int line,
                      long long minimum, std::vector<int>& out) {
    std::vector<int> items;
    for (const std::string& item : split_list(value)) {
      long long parsed = 0;
      if (!parse_int64(item, parsed) || parsed < minimum ||
          parsed > std::numeric_limits<int>::max()) {
        issue(line, full + ": '" + item + "' is not a valid entry");
        return;
      }
      items.push_back(static_cast<int>(parsed));
    }
    out = std::move(items);
  }

  void parse_double_list(const std::string& full, const std::string& value,
                         int line, std::vector<double>& out) {
    std::vector<double> items;
    for (const std::string& item : split_list(value)) {
      double parsed = 0.0;
      if (!parse_double(item, parsed)) {
        issue(line, full + ": '" + item + "' is not a number");
        return;
      }
      items.push_back(parsed);
    }
    out = std::move(items);
  }

  SimulationConfig& config_;
  std::vector<std::string>& issues_;
  std::set<std::string> seen_;
};

}  // namespace

ConfigLoadResult load_config(const std::string& path,
                             const ConfigOverrides& overrides) {
  ConfigLoadResult result;
  std::ifstream in(path);
  if (!in) {
    result.issues.push_back("cannot open config file " + path);
    return result;
  }

  Parser parser(result.config, result.issues);
  std::string section;
  std::string line;
  int line_number = 0;
  static const std::set<std::string> kSections = {"model", "data", "strategy",
                                                  "run"};
  while (std::getline(in, line)) {
    ++line_number;
    std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) {
        parser.issue(line_number, "malformed section header '" + text + "'");
        section.clear();
        continue;
      }
      section = trim(text.substr(1, text.size() - 2));
      if (kSections.count(section) == 0) {
        parser.issue(line_number, "unknown section '" + section + "'");
        section.clear();
      }
      continue;
    }
    std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      parser.issue(line_number, "expected 'key = value', got '" + text + "'");
      continue;
    }
    if (section.empty()) {
      parser.issue(line_number, "key outside any [section]");
      continue;
    }
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty()) {
      parser.issue(line_number, "empty key");
      continue;
    }
    parser.consume(section, key, value, line_number);
  }

  for (const char* required :
       {"data.source", "strategy.kind", "run.clients", "run.rounds"}) {
    if (!parser.saw(required)) {
      result.issues.push_back(std::string("missing required key ") + required);
    }
  }

  if (overrides.seed) {
    result.config.run.seed = *overrides.seed;
  }
  if (overrides.strategy) {
    if (auto kind = parse_strategy_name(*overrides.strategy)) {
      result.config.strategy.kind = *kind;
    } else {
      result.issues.push_back("--strategy: unknown strategy '" +
                              *overrides.strategy +
                              "' (expected vanilla, async, or dml)");
    }
  }
  if (overrides.out) {
    result.config.run.out = *overrides.out;
  }

  for (std::string& message : validate_config(result.config)) {
    result.issues.push_back(std::move(message));
  }
  return result;
}

std::vector<std::string> validate_config(const SimulationConfig& config) {
  std::vector<std::string> issues;
  auto bad = [&issues](const std::string& message) { issues.push_back(message); };

  if (config.model.hidden.empty()) {
    bad("model.hidden: at least one hidden layer is required");
  }
  for (int width : config.model.hidden) {
    if (width < 1) {
      bad("model.hidden: layer widths must be >= 1");
      break;
    }
  }
  if (config.model.dropout.size() != config.model.hidden.size()) {
    bad("model.dropout: " + std::to_string(config.model.dropout.size()) +
        " rates for " + std::to_string(config.model.hidden.size()) +
        " hidden layers");
  }
  for (double rate : config.model.dropout) {
    if (!(rate >= 0.0) || !(rate < 1.0)) {
      bad("model.dropout: rates must lie in [0, 1)");
      break;
    }
  }

  if (config.data.source == DataSource::kCsv) {
    if (config.data.csv_path.empty()) {
      bad("data.csv_path: required when data.source = csv");
    }
  } else {
    if (config.data.synthetic_n < 2 || config.data.synthetic_n % 2 != 0) {
      bad("data.synthetic_n: must be even and >= 2");
    }
    if (config.data.synthetic_dim < 2) {
      bad("data.synthetic_dim: must be >= 2");
    }
    if (!std::isfinite(config.data.synthetic_separation) ||
        config.data.synthetic_separation < 0.0) {
      bad("data.synthetic_separation: must be finite and >= 0");
    }
  }
  if (!(config.data.holdout_fraction >= 0.0) ||
      !(config.data.holdout_fraction < 1.0)) {
    bad("data.holdout_fraction: must lie in [0, 1)");
  }

  const StrategySpec& s = config.strategy;
  if (s.delta < 1) bad("strategy.delta: must be >= 1");
  if (s.warmup < 0) bad("strategy.warmup: must be >= 0");
  if (s.local_epochs < 1) bad("strategy.local_epochs: must be >= 1");
  if (s.mutual_epochs < 1) bad("strategy.mutual_epochs: must be >= 1");
  if (!std::isfinite(s.lr) || s.lr <= 0.0) {
    bad("strategy.lr: must be finite and > 0");
  }
  if (s.batch_size < 1) bad("strategy.batch_size: must be >= 1");
  if (!std::isfinite(s.kl_coefficient) || s.kl_coefficient < 0.0) {
    bad("strategy.kl_coefficient: must be finite and >= 0");
  }
  std::size_t layer_count = config.model.hidden.size() + 1;
  if (s.shallow_boundary < 0 ||
      (s.shallow_boundary != 0 &&
       static_cast<std::size_t>(s.shallow_boundary) >= layer_count)) {
    bad("strategy.shallow_boundary: must be 0 (auto) or in [1, " +
        std::to_string(layer_count) + ")");
  }

  if (config.run.clients < 2) {
    bad("run.clients: must be at least 2 (got " +
        std::to_string(config.run.clients) + ")");
  }
  if (config.run.rounds < 1) {
    bad("run.rounds: must be at least 1 (got " +
        std::to_string(config.run.rounds) + ")");
  }
  if (config.run.out.empty()) bad("run.out: must not be empty");
  if (config.run.threads < 1) bad("run.threads: must be >= 1");
  if (config.run.checkpoint_every < 0) bad("run.checkpoint_every: must be >= 0");
  return issues;
}

std::vector<std::string> validate_feasibility(const SimulationConfig& config) {
  std::vector<std::string> issues;
  Dataset dataset;
  try {
    if (config.data.source == DataSource::kCsv) {
      dataset = load_csv(config.data.csv_path);
    } else {
      dataset = generate_synthetic(
          static_cast<std::size_t>(config.data.synthetic_n),
          static_cast<std::size_t>(config.data.synthetic_dim),
          config.data.synthetic_separation, derive_seed(config.run.seed, "data"));
    }
  } catch (const std::exception& error) {
    issues.push_back(error.what());
    return issues;
  }

  Dataset train = dataset;
  if (config.data.holdout_fraction > 0.0) {
    RngStream holdout_rng(derive_seed(config.run.seed, "holdout"));
    try {
      auto [kept, held] =
          split_holdout(dataset, config.data.holdout_fraction, holdout_rng);
      if (held.size() == 0) {
        issues.push_back("holdout split is empty; lower data.holdout_fraction "
                         "only if you do not need held-out metrics");
      }
      train = std::move(kept);
    } catch (const std::exception& error) {
      issues.push_back(error.what());
      return issues;
    }
  }

  try {
    stratified_kfold(train, static_cast<std::size_t>(config.run.clients),
                     static_cast<std::size_t>(config.run.rounds),
                     derive_seed(config.run.seed, "folds"));
  } catch (const std::exception& error) {
    issues.push_back(error.what());
  }
  return issues;
}

std::string serialize_config(const SimulationConfig& config) {
  std::ostringstream out;
  auto join_ints = [](const std::vector<int>& values) {
    std::string text;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) text += ",";
      text += std::to_string(values[i]);
    }
    return text;
  };
  auto join_doubles = [](const std::vector<double>& values) {
    std::string text;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) text += ",";
      text += format_double(values[i]);
    }
    return text;
  };

  out << "[model]\n";
  out << "hidden = " << join_ints(config.model.hidden) << "\n";
  out << "dropout = " << join_doubles(config.model.dropout) << "\n";
  out << "\n[data]\n";
  out << "source = "
      << (config.data.source == DataSource::kCsv ? "csv" : "synthetic") << "\n";
  out << "csv_path = " << config.data.csv_path << "\n";
  out << "synthetic_n = " << config.data.synthetic_n << "\n";
  out << "synthetic_dim = " << config.data.synthetic_dim << "\n";
  out << "synthetic_separation = " << format_double(config.data.synthetic_separation)
      << "\n";
  out << "holdout_fraction = " << format_double(config.data.holdout_fraction)
      << "\n";
  out << "normalize = " << (config.data.normalize ? "true" : "false") << "\n";
  out << "\n[strategy]\n";
  out << "kind = " << strategy_name(config.strategy.kind) << "\n";
  out << "delta = " << config.strategy.delta << "\n";
  out << "warmup = " << config.strategy.warmup << "\n";
  out << "local_epochs = " << config.strategy.local_epochs << "\n";
  out << "mutual_epochs = " << config.strategy.mutual_epochs << "\n";
  out << "lr = " << format_double(config.strategy.lr) << "\n";
  out << "batch_size = " << config.strategy.batch_size << "\n";
  out << "kl_direction = " << direction_name(config.strategy.kl_direction) << "\n";
  out << "kl_coefficient = " << format_double(config.strategy.kl_coefficient)
      << "\n";
  out << "shallow_boundary = " << config.strategy.shallow_boundary << "\n";
  out << "\n[run]\n";
  out << "clients = " << config.run.clients << "\n";
  out << "rounds = " << config.run.rounds << "\n";
  out << "seed = " << config.run.seed << "\n";
  out << "out = " << config.run.out << "\n";
  out << "threads = " << config.run.threads << "\n";
  out << "verbose_trace = " << (config.run.verbose_trace ? "true" : "false")
      << "\n";
  out << "checkpoint_every = " << config.run.checkpoint_every << "\n";
  return out.str();
}

}  // namespace fedsim
