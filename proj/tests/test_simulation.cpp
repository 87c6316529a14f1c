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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/cli.hpp"
#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/simulation.hpp"

using namespace fedsim;

namespace {

namespace fs = std::filesystem;

fs::path temp_root() {
  fs::path dir = fs::temp_directory_path() / "fedsim_test_simulation";
  fs::create_directories(dir);
  return dir;
}

fs::path temp_path(const std::string& name) { return temp_root() / name; }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::size_t line_count(const std::string& text) {
  std::size_t lines = 0;
  for (char ch : text) {
    if (ch == '\n') ++lines;
  }
  return lines;
}

bool bit_equal(const ModelParameters& a, const ModelParameters& b) {
  if (a.layer_count() != b.layer_count()) return false;
  for (std::size_t k = 0; k < a.layer_count(); ++k) {
    if (a.layers[k].weights.data() != b.layers[k].weights.data()) return false;
    if (a.layers[k].biases != b.layers[k].biases) return false;
  }
  return true;
}

// Small, fast end-to-end config: 3 clients, 3 rounds, one hidden layer.
SimulationConfig small_config(StrategyKind kind) {
  SimulationConfig config;
  config.model.hidden = {8};
  config.model.dropout = {0.0};
  config.data.source = DataSource::kSynthetic;
  config.data.synthetic_n = 400;
  config.data.synthetic_dim = 2;
  config.data.synthetic_separation = 6.0;
  config.data.holdout_fraction = 0.2;
  config.data.normalize = true;
  config.strategy.kind = kind;
  config.strategy.delta = 3;
  config.strategy.warmup = 0;
  config.strategy.local_epochs = 2;
  config.strategy.mutual_epochs = 2;
  config.strategy.lr = 0.05;
  config.strategy.batch_size = 16;
  config.run.clients = 3;
  config.run.rounds = 3;
  config.run.seed = 42;
  config.run.threads = 1;
  config.run.out = (temp_root() / "out").string();
  return config;
}

const std::string kMinimalIni =
    "[data]\n"
    "source = synthetic\n"
    "[strategy]\n"
    "kind = vanilla\n"
    "[run]\n"
    "clients = 2\n"
    "rounds = 1\n";

}  // namespace

TEST_CASE("account_communication: fixed byte-per-value rates") {
  CHECK(account_communication(MessageKind::kFullWeights, 10000) == 40000);
  CHECK(account_communication(MessageKind::kShallowWeights, 6000) == 24000);
  CHECK(account_communication(MessageKind::kPredictions, 100) == 400);
  CHECK(account_communication(MessageKind::kMetrics, 12345) == 8);
  CHECK(account_communication(MessageKind::kMetrics, 0) == 8);
}

TEST_CASE("evaluate: tie rule, perfect models, empty data") {
  // All-zero single-layer model outputs exactly 0.5; ties count as class 1,
  // so balanced data scores exactly one half.
  ModelParameters coin;
  DenseLayer layer;
  layer.weights = Matrix(1, 2);
  layer.biases = {0.0};
  coin.layers.push_back(layer);

  Dataset balanced;
  balanced.features = Matrix(4, 2);
  balanced.labels = {0, 1, 0, 1};
  CHECK(evaluate(coin, balanced).accuracy == 0.5);

  // A confident linear separator scores exactly 1.
  ModelParameters sharp = coin;
  sharp.layers[0].weights(0, 0) = 10.0;
  Dataset split;
  split.features = Matrix(2, 2);
  split.features(0, 0) = -1.0;
  split.features(1, 0) = 1.0;
  split.labels = {0, 1};
  EvalResult result = evaluate(sharp, split);
  CHECK(result.accuracy == 1.0);
  CHECK(result.bce == bce_loss(predict(sharp, split.features), split.labels));

  CHECK_THROWS_AS(evaluate(coin, Dataset{}), std::invalid_argument);
}

TEST_CASE("load_config: minimal file picks up every default") {
  auto path = temp_path("minimal.ini");
  write_file(path, kMinimalIni);
  ConfigLoadResult loaded = load_config(path.string());
  REQUIRE(loaded.issues.empty());
  const SimulationConfig& config = loaded.config;
  CHECK(config.model.hidden == std::vector<int>{32, 16});
  CHECK(config.model.dropout == std::vector<double>{0.2, 0.2});
  CHECK(config.data.synthetic_n == 2000);
  CHECK(config.data.holdout_fraction == 0.2);
  CHECK(config.strategy.kind == StrategyKind::kVanilla);
  CHECK(config.strategy.lr == 0.05);
  CHECK(config.strategy.delta == 3);
  CHECK(config.strategy.warmup == 5);
  CHECK(config.run.clients == 2);
  CHECK(config.run.rounds == 1);
  CHECK(config.run.seed == 42);
  CHECK(config.run.threads == 1);
  CHECK(config.run.out == "out");
}

TEST_CASE("load_config: every problem in a bad file is reported at once") {
  auto path = temp_path("broken.ini");
  write_file(path,
             "[data]\n"
             "source = synthetic\n"
             "mystery = 1\n"
             "[strategy]\n"
             "kind = gossip\n"
             "[run]\n"
             "clients = 1\n"
             "rounds = 0\n");
  ConfigLoadResult loaded = load_config(path.string());
  std::string joined;
  for (const std::string& issue : loaded.issues) joined += issue + "\n";
  CHECK(loaded.issues.size() >= 4);
  CHECK(joined.find("unknown key 'data.mystery'") != std::string::npos);
  CHECK(joined.find("unknown strategy 'gossip'") != std::string::npos);
  CHECK(joined.find("run.clients: must be at least 2") != std::string::npos);
  CHECK(joined.find("run.rounds: must be at least 1") != std::string::npos);
}

TEST_CASE("load_config: missing required keys are named") {
  auto path = temp_path("sparse.ini");
  write_file(path, "[run]\nclients = 2\n");
  ConfigLoadResult loaded = load_config(path.string());
  std::string joined;
  for (const std::string& issue : loaded.issues) joined += issue + "\n";
  CHECK(joined.find("missing required key data.source") != std::string::npos);
  CHECK(joined.find("missing required key strategy.kind") != std::string::npos);
  CHECK(joined.find("missing required key run.rounds") != std::string::npos);
}

TEST_CASE("serialize_config: reload-and-reserialize is byte-stable") {
  auto path = temp_path("serialize.ini");
  write_file(path, kMinimalIni);
  ConfigLoadResult first = load_config(path.string());
  REQUIRE(first.issues.empty());
  std::string echo = serialize_config(first.config);

  auto echo_path = temp_path("serialize_echo.ini");
  write_file(echo_path, echo);
  ConfigLoadResult second = load_config(echo_path.string());
  REQUIRE(second.issues.empty());
  CHECK(serialize_config(second.config) == echo);
}

TEST_CASE("strategy names round-trip") {
  for (StrategyKind kind : {StrategyKind::kVanilla, StrategyKind::kAsyncWeights,
                            StrategyKind::kMutualLearning}) {
    auto parsed = parse_strategy_name(strategy_name(kind));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == kind);
  }
  CHECK_FALSE(parse_strategy_name("gossip").has_value());
}

TEST_CASE("validate_config: zero rounds is rejected") {
  SimulationConfig config = small_config(StrategyKind::kVanilla);
  config.run.rounds = 0;
  std::vector<std::string> issues = validate_config(config);
  REQUIRE_FALSE(issues.empty());
  bool mentioned = false;
  for (const std::string& issue : issues) {
    if (issue.find("run.rounds") != std::string::npos) mentioned = true;
  }
  CHECK(mentioned);
}

TEST_CASE("run_simulation: invalid configs are refused up front") {
  SimulationConfig config = small_config(StrategyKind::kVanilla);
  config.run.clients = 1;
  CHECK_THROWS_WITH_AS(run_simulation(config), doctest::Contains("invalid config"),
                       std::runtime_error);
}

TEST_CASE("run_simulation: synchronous averaging keeps every client identical") {
  SimulationConfig config = small_config(StrategyKind::kVanilla);
  int observed_rounds = 0;
  SimulationResult result = run_simulation(
      config, [&](const RoundRecord& record, const std::vector<ModelParameters>& params,
                  const ModelParameters* global) {
        ++observed_rounds;
        REQUIRE(global != nullptr);
        for (const ModelParameters& client : params) {
          CHECK(bit_equal(client, *global));
        }
        CHECK(record.event == RoundEvent::kDeepShare);
        REQUIRE(record.global.has_value());
      });
  CHECK(observed_rounds == 3);
  CHECK(result.records.size() == 3);
  for (const RoundRecord& record : result.records) {
    CHECK(record.clients.size() == 3);
    CHECK_FALSE(record.layer_boundary.has_value());
    for (const ClientRoundMetrics& client : record.clients) {
      CHECK_FALSE(client.common_accuracy.has_value());
      CHECK_FALSE(client.kld_term.has_value());
      CHECK(client.train_loss_curve.size() == 2);
    }
  }
  CHECK(result.ledger.rows.size() == 9);
  REQUIRE(result.final_global.has_value());
  CHECK(result.final_clients.size() == 3);
  CHECK(result.holdout.size() == 3);
  CHECK(result.initial_global.accuracy >= 0.0);
  CHECK(result.initial_global.accuracy <= 1.0);

  // All clients share one model after the final synchronisation.
  CHECK(bit_equal(result.final_clients[0], *result.final_global));
  CHECK(bit_equal(result.final_clients[1], *result.final_global));

  // Each round moves the full parameter vector both ways.
  std::uint64_t full_bytes = account_communication(
      MessageKind::kFullWeights, result.final_clients[0].parameter_count());
  for (const CommRow& row : result.ledger.rows) {
    CHECK(row.bytes_sent == full_bytes);
    CHECK(row.bytes_received == full_bytes);
  }
  CHECK(result.ledger.total_sent == 9 * full_bytes);
}

TEST_CASE("run_simulation: asynchronous sharing switches depth on schedule") {
  SimulationConfig config = small_config(StrategyKind::kAsyncWeights);
  // delta = 3, warmup = 0: rounds 0 and 1 shallow, round 2 deep.
  SimulationResult result = run_simulation(config);
  REQUIRE(result.records.size() == 3);
  CHECK(result.records[0].event == RoundEvent::kShallowShare);
  CHECK(result.records[1].event == RoundEvent::kShallowShare);
  CHECK(result.records[2].event == RoundEvent::kDeepShare);
  CHECK(result.records[0].layer_boundary.has_value());
  CHECK_FALSE(result.records[2].layer_boundary.has_value());
  REQUIRE(result.final_global.has_value());
  for (const RoundRecord& record : result.records) {
    REQUIRE(record.global.has_value());
  }

  const ModelParameters& model = result.final_clients[0];
  std::size_t boundary = default_boundary(model.layer_count());
  CHECK(*result.records[0].layer_boundary == static_cast<int>(boundary));
  std::uint64_t shallow_bytes = account_communication(
      MessageKind::kShallowWeights, model.parameter_count_below(boundary));
  std::uint64_t full_bytes =
      account_communication(MessageKind::kFullWeights, model.parameter_count());
  std::uint64_t metric_bytes = account_communication(MessageKind::kMetrics, 1);
  CHECK(result.records[0].clients[0].bytes_sent == shallow_bytes + metric_bytes);
  CHECK(result.records[0].clients[0].bytes_received == shallow_bytes);
  CHECK(result.records[2].clients[0].bytes_sent == full_bytes + metric_bytes);
  CHECK(result.records[2].clients[0].bytes_received == full_bytes);
}

TEST_CASE("run_simulation: mutual learning exchanges predictions only") {
  SimulationConfig config = small_config(StrategyKind::kMutualLearning);
  SimulationResult result = run_simulation(config);
  REQUIRE(result.records.size() == 3);
  CHECK_FALSE(result.final_global.has_value());
  for (const RoundRecord& record : result.records) {
    CHECK(record.event == RoundEvent::kMutualExchange);
    CHECK_FALSE(record.global.has_value());
    CHECK_FALSE(record.layer_boundary.has_value());
    for (const ClientRoundMetrics& client : record.clients) {
      REQUIRE(client.common_accuracy.has_value());
      REQUIRE(client.bce_term.has_value());
      REQUIRE(client.kld_term.has_value());
      CHECK(*client.kld_term >= 0.0);
      CHECK(client.mutual_trace.size() == 2);
      // One prediction per common-set example goes out; the server returns
      // the whole pool, one sequence per participant.
      CHECK(client.bytes_sent % 4 == 0);
      CHECK(client.bytes_received == client.bytes_sent * 3);
    }
  }
}

TEST_CASE("run_simulation and write_outputs: byte-identical reruns, any thread count") {
  SimulationConfig config = small_config(StrategyKind::kMutualLearning);

  auto run_to = [&](const std::string& name, int threads) {
    SimulationConfig local = config;
    local.run.threads = threads;
    local.run.out = (temp_root() / name).string();
    SimulationResult result = run_simulation(local);
    write_outputs(result, local, local.run.out);
    return local.run.out;
  };

  std::string first = run_to("rerun_a", 1);
  std::string second = run_to("rerun_b", 1);
  std::string threaded = run_to("rerun_c", 4);

  for (const char* file : {"history.csv", "comm.csv", "events.jsonl",
                           "final_metrics.csv"}) {
    CAPTURE(file);
    std::string a = read_file(fs::path(first) / file);
    CHECK(a == read_file(fs::path(second) / file));
    CHECK(a == read_file(fs::path(threaded) / file));
  }
}

TEST_CASE("write_outputs: schemas and checkpoint round-trip") {
  SimulationConfig config = small_config(StrategyKind::kVanilla);
  config.run.out = (temp_root() / "schema_vanilla").string();
  config.run.verbose_trace = true;
  SimulationResult result = run_simulation(config);
  write_outputs(result, config, config.run.out);
  fs::path out(config.run.out);

  std::string history = read_file(out / "history.csv");
  CHECK(history.rfind("round,client,train_loss,fold_acc,common_acc,bce_term,"
                      "kld_term,bytes_sent,bytes_received\n", 0) == 0);
  CHECK(line_count(history) == 1 + 9);  // header + clients x rounds
  // Synchronous rows leave the mutual-learning columns empty.
  std::istringstream rows(history);
  std::string line;
  std::getline(rows, line);  // header
  std::getline(rows, line);
  CHECK(line.find(",,,") != std::string::npos);

  std::string comm = read_file(out / "comm.csv");
  CHECK(comm.rfind("round,client,bytes_sent,bytes_received\n", 0) == 0);
  CHECK(line_count(comm) == 1 + 9);

  std::string events = read_file(out / "events.jsonl");
  CHECK(line_count(events) == 3);
  CHECK(events.find("\"kind\":\"deep_share\"") != std::string::npos);

  std::string final_metrics = read_file(out / "final_metrics.csv");
  CHECK(final_metrics.rfind("client,holdout_acc,holdout_bce\n", 0) == 0);
  CHECK(line_count(final_metrics) == 1 + 3);

  CHECK(fs::exists(out / "config_resolved.ini"));
  CHECK(fs::exists(out / "epoch_trace.csv"));

  ModelParameters reloaded =
      load_model((out / "checkpoints" / "client_0.model").string());
  CHECK(bit_equal(reloaded, result.final_clients[0]));
  CHECK(fs::exists(out / "checkpoints" / "global.model"));

  // Mutual learning maintains no global model, so no global checkpoint.
  SimulationConfig dml = small_config(StrategyKind::kMutualLearning);
  dml.run.out = (temp_root() / "schema_dml").string();
  SimulationResult dml_result = run_simulation(dml);
  write_outputs(dml_result, dml, dml.run.out);
  fs::path dml_out(dml.run.out);
  CHECK_FALSE(fs::exists(dml_out / "checkpoints" / "global.model"));
  std::string dml_history = read_file(dml_out / "history.csv");
  // Every data row fills the mutual-learning columns.
  std::istringstream dml_rows(dml_history);
  std::getline(dml_rows, line);  // header
  while (std::getline(dml_rows, line)) {
    CHECK(line.find(",,") == std::string::npos);
  }
}

TEST_CASE("cli_run: argument and file errors exit nonzero") {
  CHECK(cli_run({}) != 0);
  CHECK(cli_run({"run"}) != 0);
  CHECK(cli_run({"run", (temp_root() / "no_such.ini").string()}) != 0);
  CHECK(cli_run({"frobnicate"}) != 0);
}

TEST_CASE("cli_run: validate and run succeed on a good config") {
  auto config_path = temp_path("cli_config.ini");
  write_file(config_path,
             "[model]\n"
             "hidden = 8\n"
             "dropout = 0\n"
             "[data]\n"
             "source = synthetic\n"
             "synthetic_n = 400\n"
             "synthetic_separation = 6\n"
             "[strategy]\n"
             "kind = vanilla\n"
             "local_epochs = 2\n"
             "[run]\n"
             "clients = 2\n"
             "rounds = 2\n");
  CHECK(cli_run({"validate", config_path.string()}) == 0);

  std::string out_dir = (temp_root() / "cli_out").string();
  CHECK(cli_run({"run", config_path.string(), "--out", out_dir}) == 0);
  for (const char* file : {"history.csv", "comm.csv", "events.jsonl",
                           "config_resolved.ini", "final_metrics.csv"}) {
    CAPTURE(file);
    CHECK(fs::exists(fs::path(out_dir) / file));
  }

  // A strategy override changes the protocol actually run.
  std::string dml_dir = (temp_root() / "cli_out_dml").string();
  CHECK(cli_run({"run", config_path.string(), "--out", dml_dir, "--strategy",
                 "dml"}) == 0);
  std::string events = read_file(fs::path(dml_dir) / "events.jsonl");
  CHECK(events.find("mutual_exchange") != std::string::npos);
  CHECK(events.find("deep_share") == std::string::npos);
}
