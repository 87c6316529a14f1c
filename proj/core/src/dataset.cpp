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

#include "fedsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedsim/text.hpp"

namespace fedsim {

std::array<std::size_t, 2> Dataset::class_counts() const {
  std::array<std::size_t, 2> counts{0, 0};
  for (int y : labels) {
    counts[static_cast<std::size_t>(y)] += 1;
  }
  return counts;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_csv: " + path + ": empty file, expected a header");
  }
  std::vector<std::string> header = split_fields(line);
  if (header.size() < 2 || header.back() != "label") {
    throw std::runtime_error("load_csv: " + path +
                             ": header must list feature columns and end with 'label'");
  }
  std::size_t dim = header.size() - 1;

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t data_row = 0;  // 1-based, header excluded
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++data_row;
    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("load_csv: " + path + ": row " +
                               std::to_string(data_row) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < dim; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v) || !std::isfinite(v)) {
        throw std::runtime_error("load_csv: " + path + ": row " +
                                 std::to_string(data_row) + ", column " +
                                 std::to_string(c) + ": '" + fields[c] +
                                 "' is not a finite number");
      }
      values.push_back(v);
    }
    const std::string& label_text = fields[dim];
    if (label_text != "0" && label_text != "1") {
      throw std::runtime_error("load_csv: " + path + ": row " +
                               std::to_string(data_row) + ": label '" + label_text +
                               "' is not 0 or 1");
    }
    labels.push_back(label_text == "1" ? 1 : 0);
  }
  if (labels.empty()) {
    throw std::runtime_error("load_csv: " + path +
                             ": no data rows, stratification impossible");
  }

  Dataset dataset;
  dataset.features = Matrix(labels.size(), dim);
  dataset.features.data() = std::move(values);
  dataset.labels = std::move(labels);
  return dataset;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_csv: cannot open " + path + " for writing");
  }
  for (std::size_t c = 0; c < dataset.dim(); ++c) {
    out << 'f' << c << ',';
  }
  out << "label\n";
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (std::size_t c = 0; c < dataset.dim(); ++c) {
      out << format_double(dataset.features(r, c)) << ',';
    }
    out << dataset.labels[r] << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_csv: write to " + path + " failed");
  }
}

Dataset generate_synthetic(std::size_t n, std::size_t dim, double separation,
                           std::uint64_t seed) {
  if (n == 0 || n % 2 != 0) {
    throw std::invalid_argument("generate_synthetic: n must be positive and even");
  }
  if (dim < 2) {
    throw std::invalid_argument("generate_synthetic: dim must be at least 2");
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw std::invalid_argument("generate_synthetic: separation must be finite and >= 0");
  }
  RngStream rng(seed);
  Dataset dataset;
  dataset.features = Matrix(n, dim);
  dataset.labels.assign(n, 0);
  std::size_t half = n / 2;
  for (std::size_t r = 0; r < n; ++r) {
    int label = r < half ? 0 : 1;
    double center = label == 0 ? -separation / 2.0 : separation / 2.0;
    dataset.features(r, 0) = center + rng.normal();
    for (std::size_t c = 1; c < dim; ++c) {
      dataset.features(r, c) = rng.normal();
    }
    dataset.labels[r] = label;
  }
  return dataset;
}

std::pair<Dataset, NormalizationStats> normalize(const Dataset& dataset) {
  if (dataset.size() == 0) {
    throw std::invalid_argument("normalize: empty dataset");
  }
  NormalizationStats stats;
  std::size_t n = dataset.size();
  std::size_t d = dataset.dim();
  stats.mean.assign(d, 0.0);
  stats.std.assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      sum += dataset.features(r, c);
    }
    stats.mean[c] = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double dev = dataset.features(r, c) - stats.mean[c];
      sq += dev * dev;
    }
    // Population variance with a floor that keeps constant columns stable.
    stats.std[c] = std::max(std::sqrt(sq / static_cast<double>(n)), 1e-12);
  }
  return {apply_normalization(dataset, stats), stats};
}

Dataset apply_normalization(const Dataset& dataset, const NormalizationStats& stats) {
  if (stats.mean.size() != dataset.dim() || stats.std.size() != dataset.dim()) {
    throw std::invalid_argument("apply_normalization: stats cover " +
                                std::to_string(stats.mean.size()) +
                                " features, dataset has " +
                                std::to_string(dataset.dim()));
  }
  Dataset out = dataset;
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t c = 0; c < out.dim(); ++c) {
      out.features(r, c) = (out.features(r, c) - stats.mean[c]) / stats.std[c];
    }
  }
  return out;
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.features = Matrix(indices.size(), dataset.dim());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::size_t src = indices[r];
    if (src >= dataset.size()) {
      throw std::out_of_range("subset: index " + std::to_string(src) +
                              " out of range for " + std::to_string(dataset.size()) +
                              " rows");
    }
    for (std::size_t c = 0; c < dataset.dim(); ++c) {
      out.features(r, c) = dataset.features(src, c);
    }
    out.labels.push_back(dataset.labels[src]);
  }
  return out;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& dataset, double fraction,
                                          RngStream& rng) {
  if (!(fraction >= 0.0) || !(fraction < 1.0)) {
    throw std::invalid_argument("split_holdout: fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    by_class[static_cast<std::size_t>(dataset.labels[r])].push_back(r);
  }
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> holdout_idx;
  for (auto& members : by_class) {
    rng.shuffle(members);
    auto take = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < take ? holdout_idx : train_idx).push_back(members[i]);
    }
  }
  // Stable row order in both halves.
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(holdout_idx.begin(), holdout_idx.end());
  return {subset(dataset, train_idx), subset(dataset, holdout_idx)};
}

}  // namespace fedsim
