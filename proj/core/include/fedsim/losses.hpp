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

#include <vector>

namespace fedsim {

inline constexpr double kDefaultEpsilon = 1e-7;

// A binary prediction as the pair (p, 1-p). Only p is stored; the complement
// is exact by construction, so the two components always sum to 1.
struct PredictionDistribution {
  double p = 0.5;

  double positive() const { return p; }
  double negative() const { return 1.0 - p; }
};

// Clamp into [epsilon, 1 - epsilon] before any logarithm.
double clamp_probability(double p, double epsilon = kDefaultEpsilon);

// Mean of -[y ln p + (1-y) ln(1-p)] in nats over the batch. Predictions are
// clamped first; labels must be 0/1 and align with the predictions.
double bce_loss(const std::vector<PredictionDistribution>& predictions,
                const std::vector<int>& labels, double epsilon = kDefaultEpsilon);

// Two-component KL divergence in nats, sum over components of P ln(P/Q)
// after clamping both distributions. Non-negative; exactly zero when the
// clamped distributions coincide.
double kl_divergence(const PredictionDistribution& p, const PredictionDistribution& q,
                     double epsilon = kDefaultEpsilon);

// Mean over examples of the per-example average KL divergence from `own` to
// every peer sequence. Needs at least one peer; every peer sequence must
// have the same length as `own`.
double kld_avg(const std::vector<PredictionDistribution>& own,
               const std::vector<std::vector<PredictionDistribution>>& peers,
               double epsilon = kDefaultEpsilon);

// Composite mutual-learning objective: model loss plus the (already
// averaged) divergence term. Both inputs must be finite.
double mutual_loss(double model_loss, double kld);

// Fraction of predictions whose thresholded class matches the label. The
// threshold is 0.5 and a tie (p exactly 0.5) counts as class 1.
double classification_accuracy(const std::vector<PredictionDistribution>& predictions,
                               const std::vector<int>& labels);

enum class LossMode { kBceOnly, kBcePlusKld };

// Direction of the divergence term: kForward is KL(own || peer); kReverse is
// KL(peer || own), the convention of classic mutual-learning setups.
enum class KlDirection { kForward, kReverse };

// Everything compute_gradients needs to evaluate the training objective on
// one batch. peer_predictions must be batch-aligned and is only consulted in
// kBcePlusKld mode. Value semantics throughout: instances can be sliced and
// copied freely across worker threads.
struct LossSpec {
  LossMode mode = LossMode::kBceOnly;
  std::vector<std::vector<PredictionDistribution>> peer_predictions;
  double epsilon = kDefaultEpsilon;
  KlDirection kl_direction = KlDirection::kForward;
  double kl_coefficient = 1.0;
};

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double kld = 0.0;  // unscaled divergence term; total = bce + coefficient * kld
};

}  // namespace fedsim
