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

#include "fedsim/folds.hpp"

#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

std::size_t fold_budget(std::size_t clients, std::size_t rounds) {
  if (clients == 0) {
    throw std::invalid_argument("fold_budget: clients must be at least 1");
  }
  return (1 + clients) * rounds + 1;
}

FoldSchedule::FoldSchedule(std::vector<std::vector<std::size_t>> folds,
                           std::vector<std::size_t> leftover)
    : leftover_(std::move(leftover)) {
  for (auto& fold : folds) {
    pending_.push_back(std::move(fold));
  }
  initial_count_ = pending_.size();
}

std::vector<std::size_t> FoldSchedule::pop() {
  if (pending_.empty()) {
    throw std::runtime_error("FoldSchedule::pop: schedule exhausted after " +
                             std::to_string(consumed_count()) + " folds");
  }
  std::vector<std::size_t> fold = std::move(pending_.front());
  pending_.pop_front();
  return fold;
}

FoldSchedule stratified_kfold(const Dataset& dataset, std::size_t clients,
                              std::size_t rounds, std::uint64_t seed) {
  if (clients == 0) {
    throw std::invalid_argument("stratified_kfold: clients must be at least 1");
  }
  if (rounds == 0) {
    throw std::invalid_argument("stratified_kfold: rounds must be at least 1");
  }
  std::size_t fold_count = fold_budget(clients, rounds);

  std::vector<std::size_t> by_class[2];
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    by_class[static_cast<std::size_t>(dataset.labels[r])].push_back(r);
  }
  for (int cls = 0; cls < 2; ++cls) {
    if (by_class[cls].size() < fold_count) {
      throw std::invalid_argument(
          "stratified_kfold: class " + std::to_string(cls) + " has " +
          std::to_string(by_class[cls].size()) + " examples but " +
          std::to_string(fold_count) +
          " folds are required; need at least one example per class per fold");
    }
  }

  RngStream rng(seed);
  std::vector<std::vector<std::size_t>> folds(fold_count);
  std::vector<std::size_t> leftover;
  for (auto& members : by_class) {
    rng.shuffle(members);
    std::size_t usable = (members.size() / fold_count) * fold_count;
    for (std::size_t i = 0; i < usable; ++i) {
      folds[i % fold_count].push_back(members[i]);
    }
    for (std::size_t i = usable; i < members.size(); ++i) {
      leftover.push_back(members[i]);
    }
  }
  return FoldSchedule(std::move(folds), std::move(leftover));
}

}  // namespace fedsim
