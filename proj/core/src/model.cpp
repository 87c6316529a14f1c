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

#include "fedsim/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedsim/text.hpp"

namespace fedsim {

std::size_t ModelParameters::input_size() const {
  if (layers.empty()) {
    throw std::logic_error("input_size: model has no layers");
  }
  return layers.front().weights.cols();
}

std::size_t ModelParameters::parameter_count() const {
  return parameter_count_below(layers.size());
}

std::size_t ModelParameters::parameter_count_below(std::size_t boundary) const {
  std::size_t count = 0;
  for (std::size_t k = 0; k < boundary && k < layers.size(); ++k) {
    count += layers[k].weights.data().size() + layers[k].biases.size();
  }
  return count;
}

bool ModelParameters::same_shape(const ModelParameters& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (!layers[k].weights.same_shape(other.layers[k].weights) ||
        layers[k].biases.size() != other.layers[k].biases.size()) {
      return false;
    }
  }
  return true;
}

void validate_parameters(const ModelParameters& params) {
  if (params.layers.empty()) {
    throw std::invalid_argument("model: needs at least one layer");
  }
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const DenseLayer& layer = params.layers[k];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw std::invalid_argument("model: layer " + std::to_string(k) + " is empty");
    }
    if (layer.biases.size() != layer.weights.rows()) {
      throw std::invalid_argument(
          "model: layer " + std::to_string(k) + " has " +
          std::to_string(layer.biases.size()) + " biases for " +
          std::to_string(layer.weights.rows()) + " output units");
    }
    if (k > 0 && layer.weights.cols() != params.layers[k - 1].weights.rows()) {
      throw std::invalid_argument(
          "model: layer " + std::to_string(k) + " expects " +
          std::to_string(layer.weights.cols()) + " inputs but layer " +
          std::to_string(k - 1) + " outputs " +
          std::to_string(params.layers[k - 1].weights.rows()));
    }
    bool last = (k + 1 == params.layers.size());
    if (layer.dropout_rate < 0.0 || layer.dropout_rate >= 1.0 ||
        (last && layer.dropout_rate != 0.0)) {
      throw std::invalid_argument("model: layer " + std::to_string(k) +
                                  " has invalid dropout rate " +
                                  format_double(layer.dropout_rate));
    }
  }
  if (params.layers.back().weights.rows() != 1) {
    throw std::invalid_argument("model: final layer must have exactly one output unit");
  }
  if (!all_finite(params)) {
    throw std::invalid_argument("model: contains non-finite values");
  }
}

bool all_finite(const ModelParameters& params) {
  for (const DenseLayer& layer : params.layers) {
    for (double w : layer.weights.data()) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : layer.biases) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

bool GradientSet::same_shape(const ModelParameters& params) const {
  if (layers.size() != params.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (!layers[k].weights.same_shape(params.layers[k].weights) ||
        layers[k].biases.size() != params.layers[k].biases.size()) {
      return false;
    }
  }
  return true;
}

GradientSet zero_gradients(const ModelParameters& params) {
  GradientSet grads;
  grads.layers.reserve(params.layers.size());
  for (const DenseLayer& layer : params.layers) {
    LayerGradient g;
    g.weights = Matrix(layer.weights.rows(), layer.weights.cols(), 0.0);
    g.biases.assign(layer.biases.size(), 0.0);
    grads.layers.push_back(std::move(g));
  }
  return grads;
}

ModelParameters make_model(std::size_t input_dim, const std::vector<int>& hidden,
                           const std::vector<double>& dropout, RngStream& rng) {
  if (input_dim == 0) {
    throw std::invalid_argument("make_model: input dimension must be positive");
  }
  if (dropout.size() != hidden.size()) {
    throw std::invalid_argument("make_model: dropout list must align with hidden sizes");
  }
  std::vector<std::size_t> widths;
  widths.push_back(input_dim);
  for (int h : hidden) {
    if (h <= 0) {
      throw std::invalid_argument("make_model: hidden sizes must be positive");
    }
    widths.push_back(static_cast<std::size_t>(h));
  }
  widths.push_back(1);

  ModelParameters params;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    std::size_t fan_in = widths[k];
    std::size_t fan_out = widths[k + 1];
    DenseLayer layer;
    layer.weights = Matrix(fan_out, fan_in);
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : layer.weights.data()) {
      w = rng.uniform(-limit, limit);
    }
    layer.biases.assign(fan_out, 0.0);
    layer.dropout_rate = (k < hidden.size()) ? dropout[k] : 0.0;
    params.layers.push_back(std::move(layer));
  }
  validate_parameters(params);
  return params;
}

void save_model(const ModelParameters& params, const std::string& path) {
  validate_parameters(params);
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_model: cannot open " + path + " for writing");
  }
  out << "fedsim-model 1\n";
  out << "layers " << params.layers.size() << "\n";
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const DenseLayer& layer = params.layers[k];
    out << "layer " << k << " out " << layer.weights.rows() << " in "
        << layer.weights.cols() << " dropout " << format_double(layer.dropout_rate)
        << "\n";
    out << "weights";
    for (double w : layer.weights.data()) {
      out << ' ' << format_double(w);
    }
    out << "\nbiases";
    for (double b : layer.biases) {
      out << ' ' << format_double(b);
    }
    out << "\n";
  }
  if (!out) {
    throw std::runtime_error("save_model: write to " + path + " failed");
  }
}

namespace {

std::runtime_error bad_checkpoint(const std::string& path, const std::string& what) {
  return std::runtime_error("load_model: " + path + ": " + what);
}

}  // namespace

ModelParameters load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_model: cannot open " + path);
  }
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "fedsim-model" || version != 1) {
    throw bad_checkpoint(path, "not a fedsim-model v1 checkpoint");
  }
  std::size_t layer_count = 0;
  if (!(in >> word >> layer_count) || word != "layers") {
    throw bad_checkpoint(path, "missing layer count");
  }
  ModelParameters params;
  for (std::size_t k = 0; k < layer_count; ++k) {
    std::size_t index = 0, rows = 0, cols = 0;
    double rate = 0.0;
    std::string kw_out, kw_in, kw_drop;
    if (!(in >> word >> index >> kw_out >> rows >> kw_in >> cols >> kw_drop >> rate) ||
        word != "layer" || index != k || kw_out != "out" || kw_in != "in" ||
        kw_drop != "dropout") {
      throw bad_checkpoint(path, "malformed header for layer " + std::to_string(k));
    }
    DenseLayer layer;
    layer.weights = Matrix(rows, cols);
    layer.dropout_rate = rate;
    if (!(in >> word) || word != "weights") {
      throw bad_checkpoint(path, "missing weights for layer " + std::to_string(k));
    }
    for (double& w : layer.weights.data()) {
      if (!(in >> w)) {
        throw bad_checkpoint(path, "truncated weights in layer " + std::to_string(k));
      }
    }
    if (!(in >> word) || word != "biases") {
      throw bad_checkpoint(path, "missing biases for layer " + std::to_string(k));
    }
    layer.biases.assign(rows, 0.0);
    for (double& b : layer.biases) {
      if (!(in >> b)) {
        throw bad_checkpoint(path, "truncated biases in layer " + std::to_string(k));
      }
    }
    params.layers.push_back(std::move(layer));
  }
  validate_parameters(params);
  return params;
}

}  // namespace fedsim
