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

#include <cmath>
#include <vector>

#include "fedsim/losses.hpp"
#include "fedsim/model.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

// Single dense layer with explicit weights (row-major, out x in) and biases.
ModelParameters single_layer(std::size_t in, const std::vector<double>& weights,
                             const std::vector<double>& biases) {
  ModelParameters params;
  DenseLayer layer;
  layer.weights = Matrix(biases.size(), in);
  layer.weights.data() = weights;
  layer.biases = biases;
  params.layers.push_back(layer);
  return params;
}

Matrix row(const std::vector<double>& values) {
  Matrix m(1, values.size());
  m.data() = values;
  return m;
}

double l2_norm(const GradientSet& grads) {
  double sum = 0.0;
  for (const LayerGradient& layer : grads.layers) {
    for (double v : layer.weights.data()) sum += v * v;
    for (double v : layer.biases) sum += v * v;
  }
  return std::sqrt(sum);
}

}  // namespace

TEST_CASE("forward: all-zero network predicts 0.5 per row") {
  ModelParameters params;
  DenseLayer hidden_layer;
  hidden_layer.weights = Matrix(4, 3, 0.0);
  hidden_layer.biases.assign(4, 0.0);
  params.layers.push_back(hidden_layer);
  DenseLayer head;
  head.weights = Matrix(1, 4, 0.0);
  head.biases.assign(1, 0.0);
  params.layers.push_back(head);

  Matrix batch(5, 3);
  RngStream rng(7);
  for (double& v : batch.data()) v = rng.normal();

  std::vector<PredictionDistribution> preds = predict(params, batch);
  REQUIRE(preds.size() == 5);
  for (const PredictionDistribution& p : preds) {
    CHECK(p.p == 0.5);
    CHECK(p.positive() + p.negative() == 1.0);
  }
}

TEST_CASE("forward: identity-ish single layer at zero input gives 0.5") {
  ModelParameters params = single_layer(1, {1.0}, {0.0});
  std::vector<PredictionDistribution> preds = predict(params, row({0.0}));
  CHECK(preds[0].p == 0.5);
}

TEST_CASE("forward: weights [[2,-1]], bias 0.5, input [1,1] -> sigmoid(1.5)") {
  ModelParameters params = single_layer(2, {2.0, -1.0}, {0.5});
  std::vector<PredictionDistribution> preds = predict(params, row({1.0, 1.0}));
  CHECK(preds[0].p == doctest::Approx(0.817574).epsilon(1e-6));
  CHECK(preds[0].p == doctest::Approx(1.0 / (1.0 + std::exp(-1.5))).epsilon(1e-12));
}

TEST_CASE("forward: eval mode is bit-for-bit deterministic") {
  RngStream init(3);
  ModelParameters params = make_model(4, {8, 3}, {0.2, 0.1}, init);
  Matrix batch(6, 4);
  RngStream data_rng(11);
  for (double& v : batch.data()) v = data_rng.normal();

  std::vector<PredictionDistribution> a = predict(params, batch);
  std::vector<PredictionDistribution> b = predict(params, batch);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].p == b[i].p);
  }
}

TEST_CASE("forward: shape and finiteness diagnostics") {
  ModelParameters params = single_layer(2, {1.0, 1.0}, {0.0});
  CHECK_THROWS_WITH_AS(predict(params, Matrix(1, 3)),
                       doctest::Contains("features"), std::invalid_argument);
  Matrix bad(1, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(predict(params, bad), std::invalid_argument);
}

TEST_CASE("forward: train mode with dropout requires an rng") {
  RngStream init(5);
  ModelParameters params = make_model(2, {4}, {0.5}, init);
  Matrix batch(1, 2, 1.0);
  CHECK_THROWS_AS(forward(params, batch, ForwardMode::kTrain, nullptr),
                  std::invalid_argument);
  // Zero dropout everywhere: train mode without an rng is fine.
  ModelParameters no_dropout = make_model(2, {4}, {0.0}, init);
  CHECK_NOTHROW(forward(no_dropout, batch, ForwardMode::kTrain, nullptr));
}

TEST_CASE("inverted dropout: masked train activations average to eval ones") {
  // Hand-built net where the head pre-activation is easy to reason about:
  // 4 hidden units each produce relu(0.25*(1+2)) = 0.75; head weights 0.5.
  ModelParameters params;
  DenseLayer hidden_layer;
  hidden_layer.weights = Matrix(4, 2, 0.25);
  hidden_layer.biases.assign(4, 0.0);
  hidden_layer.dropout_rate = 0.5;
  params.layers.push_back(hidden_layer);
  DenseLayer head;
  head.weights = Matrix(1, 4, 0.5);
  head.biases.assign(1, 0.0);
  params.layers.push_back(head);

  Matrix batch = row({1.0, 2.0});
  ForwardResult eval = forward(params, batch, ForwardMode::kEval);
  double eval_z = eval.cache.pre_activations.back()(0, 0);
  CHECK(eval_z == doctest::Approx(1.5).epsilon(1e-12));

  RngStream rng(99);
  const int kTrials = 20000;
  double sum = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    ForwardResult train = forward(params, batch, ForwardMode::kTrain, &rng);
    sum += train.cache.pre_activations.back()(0, 0);
  }
  double mean = sum / kTrials;
  CHECK(std::abs(mean - eval_z) / eval_z < 0.02);
}

TEST_CASE("bce_loss: frozen values and diagnostics") {
  CHECK(bce_loss({{0.5}}, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss({{1.0 - kDefaultEpsilon}}, {1}) ==
        doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bce_loss({{0.5}, {0.5}}, {0, 1}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss({{0.0}}, {1}) ==
        doctest::Approx(-std::log(kDefaultEpsilon)).epsilon(1e-12));
  CHECK_THROWS_AS(bce_loss({{0.5}}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(bce_loss({{0.5}}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(bce_loss({}, {}), std::invalid_argument);
}

TEST_CASE("kl_divergence: frozen values") {
  CHECK(kl_divergence({0.5}, {0.5}) == 0.0);
  CHECK(kl_divergence({0.7}, {0.7}) == 0.0);
  CHECK(kl_divergence({0.8}, {0.5}) == doctest::Approx(0.192745).epsilon(1e-6));
  double expected = 0.8 * std::log(0.8 / 0.5) + 0.2 * std::log(0.2 / 0.5);
  CHECK(kl_divergence({0.8}, {0.5}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kld_avg: frozen values and peer validation") {
  std::vector<PredictionDistribution> own = {{0.6}};
  CHECK(kld_avg(own, {own}) == 0.0);
  CHECK(kld_avg(own, {{{0.5}}}) == doctest::Approx(0.020136).epsilon(1e-6));
  CHECK(kld_avg(own, {{{0.5}}, {{0.7}}}) ==
        doctest::Approx(0.021359).epsilon(1e-6));
  CHECK_THROWS_AS(kld_avg(own, {}), std::invalid_argument);
  CHECK_THROWS_WITH_AS(kld_avg(own, {{{0.5}, {0.5}}}),
                       doctest::Contains("peer 0"), std::invalid_argument);
}

TEST_CASE("mutual_loss: sum semantics") {
  CHECK(mutual_loss(0.3, 0.2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mutual_loss(1.25, 0.0) == 1.25);
  CHECK(mutual_loss(0.693147, 0.192745) ==
        doctest::Approx(0.885892).epsilon(1e-6));
  CHECK_THROWS_AS(mutual_loss(std::nan(""), 0.0), std::invalid_argument);
}

TEST_CASE("compute_gradients: logistic regression matches (p - y) * x") {
  double w = 0.3;
  double b = -0.1;
  double x = 2.0;
  int y = 1;
  ModelParameters params = single_layer(1, {w}, {b});
  LossSpec spec;
  auto [loss, grads] = compute_gradients(params, row({x}), {y}, spec);

  double p = 1.0 / (1.0 + std::exp(-(w * x + b)));
  CHECK(loss == doctest::Approx(-std::log(p)).epsilon(1e-12));
  CHECK(grads.layers[0].weights(0, 0) ==
        doctest::Approx((p - y) * x).epsilon(1e-12));
  CHECK(grads.layers[0].biases[0] == doctest::Approx(p - y).epsilon(1e-12));
}

TEST_CASE("compute_gradients: saturated fit with matching peers has ~zero gradient") {
  // z = 40 saturates the sigmoid far past the clamp threshold.
  ModelParameters params = single_layer(1, {20.0}, {0.0});
  Matrix batch = row({2.0});
  std::vector<int> labels = {1};

  LossSpec spec;
  spec.mode = LossMode::kBcePlusKld;
  spec.peer_predictions = {predict(params, batch)};
  auto [loss, grads] = compute_gradients(params, batch, labels, spec);
  (void)loss;
  CHECK(l2_norm(grads) < 1e-6);
}

TEST_CASE("compute_gradients: finite differences, BCE only, linear model") {
  RngStream init(17);
  ModelParameters params = make_model(3, {}, {}, init);
  Matrix batch(6, 3);
  RngStream data_rng(23);
  for (double& v : batch.data()) v = data_rng.normal();
  std::vector<int> labels = {0, 1, 1, 0, 1, 0};

  LossSpec spec;
  CHECK(finite_difference_check(params, batch, labels, spec) < 1e-4);
}

TEST_CASE("compute_gradients: finite differences, BCE+KLD, deep model, 2 peers") {
  RngStream init(29);
  ModelParameters params = make_model(3, {6, 4}, {0.3, 0.2}, init);
  Matrix batch(5, 3);
  RngStream data_rng(31);
  for (double& v : batch.data()) v = data_rng.normal();
  std::vector<int> labels = {1, 0, 1, 1, 0};

  LossSpec spec;
  spec.mode = LossMode::kBcePlusKld;
  RngStream peer_rng(37);
  for (int peer = 0; peer < 2; ++peer) {
    std::vector<PredictionDistribution> preds;
    for (int i = 0; i < 5; ++i) preds.push_back({peer_rng.uniform(0.1, 0.9)});
    spec.peer_predictions.push_back(preds);
  }
  CHECK(finite_difference_check(params, batch, labels, spec) < 1e-4);

  SUBCASE("reverse divergence direction also matches") {
    spec.kl_direction = KlDirection::kReverse;
    CHECK(finite_difference_check(params, batch, labels, spec) < 1e-4);
  }
}

TEST_CASE("finite_difference_check: rejects a zero or out-of-range step") {
  ModelParameters params = single_layer(1, {1.0}, {0.0});
  LossSpec spec;
  CHECK_THROWS_AS(
      finite_difference_check(params, row({1.0}), {1}, spec, 0.0),
      std::invalid_argument);
  CHECK_THROWS_AS(
      finite_difference_check(params, row({1.0}), {1}, spec, 0.5),
      std::invalid_argument);
}

TEST_CASE("sgd_step: arithmetic, identity, and shape checks") {
  ModelParameters params = single_layer(1, {2.0}, {1.0});

  GradientSet zero = zero_gradients(params);
  ModelParameters same = sgd_step(params, zero, 0.7);
  CHECK(same.layers[0].weights(0, 0) == 2.0);
  CHECK(same.layers[0].biases[0] == 1.0);

  GradientSet grads = zero_gradients(params);
  grads.layers[0].weights(0, 0) = 0.5;
  ModelParameters stepped = sgd_step(params, grads, 1.0);
  CHECK(stepped.layers[0].weights(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  // Input untouched (pure update).
  CHECK(params.layers[0].weights(0, 0) == 2.0);

  ModelParameters twice = sgd_step(sgd_step(params, grads, 0.1), grads, 0.1);
  CHECK(twice.layers[0].weights(0, 0) ==
        doctest::Approx(2.0 - 2 * 0.1 * 0.5).epsilon(1e-15));

  ModelParameters other = single_layer(2, {1.0, 1.0}, {0.0});
  CHECK_THROWS_AS(sgd_step(other, grads, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(sgd_step(params, grads, -0.1), std::invalid_argument);
}

TEST_CASE("sgd on convex logistic problem decreases BCE monotonically") {
  RngStream init(41);
  ModelParameters params = make_model(2, {}, {}, init);
  RngStream data_rng(43);
  Matrix batch(20, 2);
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) {
    int y = i < 10 ? 0 : 1;
    batch(i, 0) = (y == 0 ? -1.0 : 1.0) + 0.3 * data_rng.normal();
    batch(i, 1) = data_rng.normal();
    labels.push_back(y);
  }

  LossSpec spec;
  double previous = compute_gradients(params, batch, labels, spec).first;
  for (int step = 0; step < 100; ++step) {
    auto [loss, grads] = compute_gradients(params, batch, labels, spec);
    (void)loss;
    params = sgd_step(params, grads, 0.05);
    double current = compute_gradients(params, batch, labels, spec).first;
    CHECK(current < previous + 1e-12);
    previous = current;
  }
}

TEST_CASE("loss_components: total = bce + coefficient * kld") {
  RngStream init(47);
  ModelParameters params = make_model(2, {5}, {0.0}, init);
  Matrix batch(4, 2);
  RngStream data_rng(53);
  for (double& v : batch.data()) v = data_rng.normal();
  std::vector<int> labels = {0, 1, 0, 1};

  LossSpec spec;
  spec.mode = LossMode::kBcePlusKld;
  spec.kl_coefficient = 0.25;
  spec.peer_predictions = {{{0.3}, {0.6}, {0.2}, {0.9}}};

  LossBreakdown breakdown = loss_components(params, batch, labels, spec);
  CHECK(breakdown.total ==
        doctest::Approx(breakdown.bce + 0.25 * breakdown.kld).epsilon(1e-12));
  CHECK(breakdown.kld >= 0.0);

  // Identical peers: divergence term vanishes and the loss is pure BCE.
  spec.peer_predictions = {predict(params, batch)};
  LossBreakdown degenerate = loss_components(params, batch, labels, spec);
  CHECK(degenerate.kld == 0.0);
  CHECK(degenerate.total == degenerate.bce);
}
