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
#include <deque>
#include <vector>

#include "fedsim/dataset.hpp"

namespace fedsim {

// Total folds a run consumes: one per client per round, one extra per round,
// plus one for initialisation.
std::size_t fold_budget(std::size_t clients, std::size_t rounds);

// FIFO queue of disjoint, equal-sized, class-balanced index folds.
class FoldSchedule {
 public:
  FoldSchedule(std::vector<std::vector<std::size_t>> folds,
               std::vector<std::size_t> leftover);

  std::size_t initial_fold_count() const { return initial_count_; }
  std::size_t remaining() const { return pending_.size(); }
  std::size_t consumed_count() const { return initial_count_ - pending_.size(); }
  bool empty() const { return pending_.empty(); }

  // Next fold in order; throws when the schedule is exhausted, reporting how
  // many folds were consumed.
  std::vector<std::size_t> pop();

  // Introspection (tests, feasibility reporting).
  const std::deque<std::vector<std::size_t>>& pending() const { return pending_; }
  const std::vector<std::size_t>& leftover() const { return leftover_; }

 private:
  std::deque<std::vector<std::size_t>> pending_;
  std::vector<std::size_t> leftover_;
  std::size_t initial_count_ = 0;
};

// Builds the fold schedule for a run: fold_budget(clients, rounds) folds,
// each holding floor(count_c / folds) examples of class c, dealt round-robin
// from a per-class seeded shuffle. Indices that do not fill a complete deal
// are discarded (reported via leftover()). Every fold therefore has the same
// size and the same class mix. Requires at least one example of each class
// per fold; the error message states the required per-class minimum.
FoldSchedule stratified_kfold(const Dataset& dataset, std::size_t clients,
                              std::size_t rounds, std::uint64_t seed);

}  // namespace fedsim
