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

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/folds.hpp"
#include "fedsim/losses.hpp"
#include "fedsim/model.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/protocols.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/simulation.hpp"

namespace {

using namespace fedsim;

Dataset bench_data(std::size_t n) {
  return normalize(generate_synthetic(n, 2, 6.0, 17)).first;
}

ModelParameters bench_model(double dropout) {
  RngStream rng(18);
  return make_model(2, {32, 16}, {dropout, dropout}, rng);
}

void BM_ForwardEval(benchmark::State& state) {
  Dataset data = bench_data(static_cast<std::size_t>(state.range(0)));
  ModelParameters model = bench_model(0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(model, data.features));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardEval)->Arg(32)->Arg(256)->Arg(2000);

void BM_GradientStep(benchmark::State& state) {
  Dataset data = bench_data(static_cast<std::size_t>(state.range(0)));
  ModelParameters model = bench_model(0.2);
  RngStream rng(19);
  LossSpec spec;
  for (auto _ : state) {
    auto [loss, grads] =
        compute_gradients(model, data.features, data.labels, spec, &rng);
    benchmark::DoNotOptimize(loss);
    benchmark::DoNotOptimize(sgd_step(model, grads, 0.05));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradientStep)->Arg(32)->Arg(256);

void BM_KlDivergenceBatch(benchmark::State& state) {
  RngStream rng(20);
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<PredictionDistribution> own(n);
  std::vector<std::vector<PredictionDistribution>> peers(
      4, std::vector<PredictionDistribution>(n));
  for (std::size_t i = 0; i < n; ++i) {
    own[i].p = rng.uniform();
    for (auto& peer : peers) peer[i].p = rng.uniform();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(kld_avg(own, peers));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KlDivergenceBatch)->Arg(64)->Arg(1024);

void BM_StratifiedKfold(benchmark::State& state) {
  Dataset data = generate_synthetic(2000, 2, 2.0, 21);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stratified_kfold(data, 5, 12, 22));
  }
}
BENCHMARK(BM_StratifiedKfold);

void BM_LocalTrainEpoch(benchmark::State& state) {
  Dataset fold = bench_data(24);
  ModelParameters model = bench_model(0.2);
  RngStream rng(23);
  for (auto _ : state) {
    benchmark::DoNotOptimize(local_train(model, fold, 1, 0.05, 32, rng));
  }
}
BENCHMARK(BM_LocalTrainEpoch);

void BM_FullRound(benchmark::State& state) {
  // One short synchronous-averaging protocol, end to end.
  SimulationConfig config;
  config.model.hidden = {32, 16};
  config.model.dropout = {0.2, 0.2};
  config.data.synthetic_n = 400;
  config.data.synthetic_separation = 6.0;
  config.strategy.kind = StrategyKind::kVanilla;
  config.strategy.local_epochs = 1;
  config.run.clients = 2;
  config.run.rounds = 1;
  config.run.seed = 24;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_simulation(config));
  }
}
BENCHMARK(BM_FullRound);

}  // namespace

BENCHMARK_MAIN();
