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

#include "fedsim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

void check_batch(const ModelParameters& params, const Matrix& batch) {
  validate_parameters(params);
  if (batch.rows() == 0) {
    throw std::invalid_argument("forward: empty batch");
  }
  if (batch.cols() != params.input_size()) {
    throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                " features, model expects " +
                                std::to_string(params.input_size()));
  }
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    for (std::size_t c = 0; c < batch.cols(); ++c) {
      if (!std::isfinite(batch(r, c))) {
        throw std::invalid_argument("forward: non-finite input at row " +
                                    std::to_string(r) + ", column " +
                                    std::to_string(c));
      }
    }
  }
}

void check_spec(const LossSpec& spec, std::size_t batch_rows) {
  if (!(spec.epsilon > 0.0) || !(spec.epsilon < 0.5)) {
    throw std::invalid_argument("loss spec: epsilon must lie in (0, 0.5)");
  }
  if (!std::isfinite(spec.kl_coefficient) || spec.kl_coefficient < 0.0) {
    throw std::invalid_argument("loss spec: kl_coefficient must be finite and >= 0");
  }
  if (spec.mode == LossMode::kBcePlusKld) {
    if (spec.peer_predictions.empty()) {
      throw std::invalid_argument("loss spec: divergence mode needs at least one peer");
    }
    for (std::size_t j = 0; j < spec.peer_predictions.size(); ++j) {
      if (spec.peer_predictions[j].size() != batch_rows) {
        throw std::invalid_argument(
            "loss spec: peer " + std::to_string(j) + " has " +
            std::to_string(spec.peer_predictions[j].size()) +
            " predictions for a batch of " + std::to_string(batch_rows));
      }
    }
  }
}

// z = x . W^T + b for one layer.
Matrix affine(const Matrix& x, const DenseLayer& layer) {
  std::size_t n = x.rows();
  std::size_t out = layer.weights.rows();
  std::size_t in = layer.weights.cols();
  Matrix z(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = layer.biases[o];
      for (std::size_t j = 0; j < in; ++j) {
        acc += layer.weights(o, j) * x(i, j);
      }
      z(i, o) = acc;
    }
  }
  return z;
}

}  // namespace

ForwardResult forward(const ModelParameters& params, const Matrix& batch,
                      ForwardMode mode, RngStream* rng) {
  check_batch(params, batch);
  bool wants_dropout = false;
  for (const DenseLayer& layer : params.layers) {
    if (layer.dropout_rate > 0.0) wants_dropout = true;
  }
  if (mode == ForwardMode::kTrain && wants_dropout && rng == nullptr) {
    throw std::invalid_argument("forward: train mode with dropout needs an rng");
  }

  ForwardResult result;
  std::size_t depth = params.layers.size();
  result.cache.inputs.reserve(depth);
  result.cache.pre_activations.reserve(depth);
  result.cache.dropout_scale.reserve(depth > 0 ? depth - 1 : 0);

  Matrix activation = batch;
  for (std::size_t k = 0; k < depth; ++k) {
    const DenseLayer& layer = params.layers[k];
    result.cache.inputs.push_back(activation);
    Matrix z = affine(activation, layer);
    result.cache.pre_activations.push_back(z);
    if (k + 1 < depth) {
      Matrix h(z.rows(), z.cols());
      for (std::size_t i = 0; i < z.rows(); ++i) {
        for (std::size_t o = 0; o < z.cols(); ++o) {
          h(i, o) = z(i, o) > 0.0 ? z(i, o) : 0.0;
        }
      }
      if (mode == ForwardMode::kTrain && layer.dropout_rate > 0.0) {
        // Inverted dropout: keep with probability 1-rate, scale kept units
        // by 1/(1-rate) so eval needs no compensation.
        double keep = 1.0 - layer.dropout_rate;
        Matrix scale(h.rows(), h.cols());
        for (std::size_t i = 0; i < h.rows(); ++i) {
          for (std::size_t o = 0; o < h.cols(); ++o) {
            scale(i, o) = rng->uniform() < keep ? 1.0 / keep : 0.0;
            h(i, o) *= scale(i, o);
          }
        }
        result.cache.dropout_scale.push_back(std::move(scale));
      } else {
        result.cache.dropout_scale.push_back(Matrix());
      }
      activation = std::move(h);
    } else {
      result.predictions.reserve(z.rows());
      for (std::size_t i = 0; i < z.rows(); ++i) {
        result.predictions.push_back(PredictionDistribution{sigmoid(z(i, 0))});
      }
    }
  }
  return result;
}

std::vector<PredictionDistribution> predict(const ModelParameters& params,
                                            const Matrix& batch) {
  return forward(params, batch, ForwardMode::kEval).predictions;
}

LossBreakdown loss_components(const ModelParameters& params, const Matrix& batch,
                              const std::vector<int>& labels, const LossSpec& spec) {
  check_spec(spec, batch.rows());
  std::vector<PredictionDistribution> preds = predict(params, batch);
  LossBreakdown out;
  out.bce = bce_loss(preds, labels, spec.epsilon);
  if (spec.mode == LossMode::kBcePlusKld) {
    if (spec.kl_direction == KlDirection::kForward) {
      out.kld = kld_avg(preds, spec.peer_predictions, spec.epsilon);
    } else {
      // Reverse direction: average divergence from each fixed peer to us.
      double sum = 0.0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        double per_example = 0.0;
        for (const auto& peer : spec.peer_predictions) {
          per_example += kl_divergence(peer[i], preds[i], spec.epsilon);
        }
        sum += per_example / static_cast<double>(spec.peer_predictions.size());
      }
      out.kld = sum / static_cast<double>(preds.size());
    }
  }
  out.total = out.bce + spec.kl_coefficient * out.kld;
  return out;
}

std::pair<double, GradientSet> compute_gradients(const ModelParameters& params,
                                                 const Matrix& batch,
                                                 const std::vector<int>& labels,
                                                 const LossSpec& spec, RngStream* rng) {
  check_spec(spec, batch.rows());
  if (labels.size() != batch.rows()) {
    throw std::invalid_argument("compute_gradients: " + std::to_string(batch.rows()) +
                                " rows vs " + std::to_string(labels.size()) +
                                " labels");
  }

  ForwardResult fwd = forward(params, batch, ForwardMode::kTrain, rng);
  const std::vector<PredictionDistribution>& preds = fwd.predictions;
  std::size_t n = batch.rows();
  double inv_n = 1.0 / static_cast<double>(n);
  double eps = spec.epsilon;
  bool with_kld =
      spec.mode == LossMode::kBcePlusKld && spec.kl_coefficient != 0.0;

  // Loss value on this (train-mode) batch.
  double bce = bce_loss(preds, labels, eps);
  double kld = 0.0;
  if (spec.mode == LossMode::kBcePlusKld) {
    std::size_t peer_count = spec.peer_predictions.size();
    for (std::size_t i = 0; i < n; ++i) {
      double per_example = 0.0;
      for (const auto& peer : spec.peer_predictions) {
        per_example += spec.kl_direction == KlDirection::kForward
                           ? kl_divergence(preds[i], peer[i], eps)
                           : kl_divergence(peer[i], preds[i], eps);
      }
      kld += per_example / static_cast<double>(peer_count);
    }
    kld *= inv_n;
  }
  double loss = bce + spec.kl_coefficient * kld;

  // Delta at the sigmoid head. The loss reads the clamped probability, so
  // examples pinned at the clamp boundary contribute zero gradient.
  std::size_t depth = params.layers.size();
  Matrix delta(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double p = preds[i].p;
    if (p <= eps || p >= 1.0 - eps) {
      delta(i, 0) = 0.0;
      continue;
    }
    double g = p - static_cast<double>(labels[i]);  // d(bce)/dz
    if (with_kld) {
      double dkl_dp = 0.0;
      for (const auto& peer : spec.peer_predictions) {
        double q = clamp_probability(peer[i].p, eps);
        if (spec.kl_direction == KlDirection::kForward) {
          dkl_dp += std::log(p / q) - std::log((1.0 - p) / (1.0 - q));
        } else {
          dkl_dp += (p - q) / (p * (1.0 - p));
        }
      }
      dkl_dp /= static_cast<double>(spec.peer_predictions.size());
      g += spec.kl_coefficient * dkl_dp * p * (1.0 - p);
    }
    delta(i, 0) = g * inv_n;
  }

  // Standard backward sweep; dropout uses the cached forward scales.
  GradientSet grads = zero_gradients(params);
  for (std::size_t k = depth; k-- > 0;) {
    const Matrix& x = fwd.cache.inputs[k];
    const DenseLayer& layer = params.layers[k];
    std::size_t out = layer.weights.rows();
    std::size_t in = layer.weights.cols();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < out; ++o) {
        double d = delta(i, o);
        if (d == 0.0) continue;
        grads.layers[k].biases[o] += d;
        for (std::size_t j = 0; j < in; ++j) {
          grads.layers[k].weights(o, j) += d * x(i, j);
        }
      }
    }
    if (k == 0) break;
    Matrix next(n, in);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < in; ++j) {
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          acc += delta(i, o) * layer.weights(o, j);
        }
        next(i, j) = acc;
      }
    }
    const Matrix& scale = fwd.cache.dropout_scale[k - 1];
    const Matrix& pre = fwd.cache.pre_activations[k - 1];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < in; ++j) {
        double d = next(i, j);
        if (!scale.empty()) d *= scale(i, j);
        next(i, j) = pre(i, j) > 0.0 ? d : 0.0;
      }
    }
    delta = std::move(next);
  }
  return {loss, std::move(grads)};
}

ModelParameters sgd_step(const ModelParameters& params, const GradientSet& grads,
                         double lr) {
  if (!std::isfinite(lr) || lr < 0.0) {
    throw std::invalid_argument("sgd_step: learning rate must be finite and >= 0");
  }
  if (!grads.same_shape(params)) {
    throw std::invalid_argument("sgd_step: gradient shapes do not match parameters");
  }
  ModelParameters next = params;
  for (std::size_t k = 0; k < next.layers.size(); ++k) {
    auto& w = next.layers[k].weights.data();
    const auto& gw = grads.layers[k].weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= lr * gw[i];
    }
    auto& b = next.layers[k].biases;
    const auto& gb = grads.layers[k].biases;
    for (std::size_t i = 0; i < b.size(); ++i) {
      b[i] -= lr * gb[i];
    }
  }
  return next;
}

double finite_difference_check(const ModelParameters& params, const Matrix& batch,
                               const std::vector<int>& labels, const LossSpec& spec,
                               double step, std::size_t max_coordinates,
                               std::uint64_t sample_seed) {
  if (!(step >= 1e-6) || !(step <= 1e-3)) {
    throw std::invalid_argument("finite_difference_check: step must lie in [1e-6, 1e-3]");
  }
  // Dropout off so the loss is a deterministic function of the parameters.
  ModelParameters frozen = params;
  for (DenseLayer& layer : frozen.layers) {
    layer.dropout_rate = 0.0;
  }
  auto [loss, grads] = compute_gradients(frozen, batch, labels, spec, nullptr);
  (void)loss;

  struct Coordinate {
    std::size_t layer;
    bool bias;
    std::size_t index;
  };
  std::vector<Coordinate> coords;
  coords.reserve(frozen.parameter_count());
  for (std::size_t k = 0; k < frozen.layers.size(); ++k) {
    for (std::size_t i = 0; i < frozen.layers[k].weights.data().size(); ++i) {
      coords.push_back({k, false, i});
    }
    for (std::size_t i = 0; i < frozen.layers[k].biases.size(); ++i) {
      coords.push_back({k, true, i});
    }
  }
  if (max_coordinates > 0 && coords.size() > max_coordinates) {
    RngStream rng(derive_seed(sample_seed, "fd-sample"));
    rng.shuffle(coords);
    coords.resize(max_coordinates);
  }

  double worst = 0.0;
  for (const Coordinate& c : coords) {
    double* slot = c.bias ? &frozen.layers[c.layer].biases[c.index]
                          : &frozen.layers[c.layer].weights.data()[c.index];
    double saved = *slot;
    *slot = saved + step;
    double up = loss_components(frozen, batch, labels, spec).total;
    *slot = saved - step;
    double down = loss_components(frozen, batch, labels, spec).total;
    *slot = saved;
    double numeric = (up - down) / (2.0 * step);
    double analytic = c.bias ? grads.layers[c.layer].biases[c.index]
                             : grads.layers[c.layer].weights.data()[c.index];
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace fedsim
