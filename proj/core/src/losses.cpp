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

#include "fedsim/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 0.5)) {
    throw std::invalid_argument("loss: epsilon must lie in (0, 0.5)");
  }
}

void check_labels(const std::vector<int>& labels, std::size_t expected,
                  const char* who) {
  if (labels.size() != expected) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(expected) +
                                " predictions vs " + std::to_string(labels.size()) +
                                " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw std::invalid_argument(std::string(who) + ": labels must be 0 or 1, got " +
                                  std::to_string(y));
    }
  }
}

}  // namespace

double clamp_probability(double p, double epsilon) {
  check_epsilon(epsilon);
  if (p < epsilon) return epsilon;
  if (p > 1.0 - epsilon) return 1.0 - epsilon;
  return p;
}

double bce_loss(const std::vector<PredictionDistribution>& predictions,
                const std::vector<int>& labels, double epsilon) {
  check_epsilon(epsilon);
  check_labels(labels, predictions.size(), "bce_loss");
  if (predictions.empty()) {
    throw std::invalid_argument("bce_loss: empty batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double p = clamp_probability(predictions[i].p, epsilon);
    sum += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(predictions.size());
}

double kl_divergence(const PredictionDistribution& p, const PredictionDistribution& q,
                     double epsilon) {
  double pp = clamp_probability(p.p, epsilon);
  double qp = clamp_probability(q.p, epsilon);
  // Two-component sum; clamping keeps both components of each pair positive
  // and exactly complementary, so no renormalisation is needed.
  return pp * std::log(pp / qp) + (1.0 - pp) * std::log((1.0 - pp) / (1.0 - qp));
}

double kld_avg(const std::vector<PredictionDistribution>& own,
               const std::vector<std::vector<PredictionDistribution>>& peers,
               double epsilon) {
  if (peers.empty()) {
    throw std::invalid_argument("kld_avg: needs at least one peer sequence");
  }
  if (own.empty()) {
    throw std::invalid_argument("kld_avg: empty prediction sequence");
  }
  for (std::size_t j = 0; j < peers.size(); ++j) {
    if (peers[j].size() != own.size()) {
      throw std::invalid_argument("kld_avg: peer " + std::to_string(j) + " has " +
                                  std::to_string(peers[j].size()) +
                                  " predictions, expected " +
                                  std::to_string(own.size()));
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < own.size(); ++i) {
    double per_example = 0.0;
    for (const auto& peer : peers) {
      per_example += kl_divergence(own[i], peer[i], epsilon);
    }
    sum += per_example / static_cast<double>(peers.size());
  }
  return sum / static_cast<double>(own.size());
}

double mutual_loss(double model_loss, double kld) {
  if (!std::isfinite(model_loss) || !std::isfinite(kld)) {
    throw std::invalid_argument("mutual_loss: non-finite component");
  }
  return model_loss + kld;
}

double classification_accuracy(const std::vector<PredictionDistribution>& predictions,
                               const std::vector<int>& labels) {
  check_labels(labels, predictions.size(), "classification_accuracy");
  if (predictions.empty()) {
    throw std::invalid_argument("classification_accuracy: empty batch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    int predicted = predictions[i].p >= 0.5 ? 1 : 0;  // ties go to class 1
    if (predicted == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace fedsim
