// Copyright 2026 The fldebug Authors. All Rights Reserved.
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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fldebug/clock.hpp"
#include "fldebug/dataset.hpp"
#include "fldebug/model/tensor.hpp"

namespace fldebug::model {

inline constexpr float kDefaultActivationThreshold = 0.003f;

/// Layer widths of a fully-connected ReLU network: input dim, hidden dims,
/// number of classes.
struct ModelArch {
  std::vector<std::size_t> layer_sizes;

  void validate() const;
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t num_hidden_layers() const { return layer_sizes.size() - 2; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t hidden_neuron_count() const;
  std::size_t param_count() const;
  /// Offset of layer l's weight block in the flat parameter vector. The bias
  /// block follows immediately.
  std::size_t weight_offset(std::size_t layer) const;

  std::string to_string() const;
  static ModelArch parse(const std::string& text);  // "64,32,10"

  friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

/// Weights of one model, flattened layer-major with each layer stored as
/// its row-major (out x in) weight matrix followed by its bias vector.
class ModelSnapshot {
 public:
  ModelSnapshot() = default;
  ModelSnapshot(ModelArch arch, std::vector<float> params);

  static ModelSnapshot zeros(const ModelArch& arch);

  const ModelArch& arch() const { return arch_; }
  std::span<const float> params() const { return params_; }
  std::span<float> params() { return params_; }

  std::span<const float> weights(std::size_t layer) const;
  std::span<float> weights(std::size_t layer);
  std::span<const float> bias(std::size_t layer) const;
  std::span<float> bias(std::size_t layer);

  bool comparable_with(const ModelSnapshot& other) const { return arch_ == other.arch_; }

  /// SHA-256 over architecture and parameter bytes.
  std::string digest() const;

  /// Bitwise equality (distinguishes -0.0 from 0.0, treats identical NaN
  /// payloads as equal).
  bool bit_equal(const ModelSnapshot& other) const;

 private:
  ModelArch arch_;
  std::vector<float> params_;
};

struct NeuronId {
  std::uint32_t layer = 0;  // hidden layer index, 0-based
  std::uint32_t index = 0;

  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

/// Hidden neurons whose post-ReLU value strictly exceeds the threshold.
/// `active` is sorted ascending.
struct ActivationProfile {
  std::vector<NeuronId> active;
  float threshold_used = kDefaultActivationThreshold;

  std::size_t size() const { return active.size(); }
  bool contains(NeuronId id) const;
  bool is_subset_of(const ActivationProfile& other) const;
};

struct ForwardResult {
  Tensor logits;
  ActivationProfile profile;
  std::size_t predicted_label = 0;
};

/// Index of the first maximum.
std::size_t argmax(std::span<const float> values);

ModelSnapshot init_model(const ModelArch& arch, std::uint64_t seed);

ForwardResult forward(const ModelSnapshot& model, const Tensor& input,
                      float threshold = kDefaultActivationThreshold);

/// Prediction only; no profile is materialized.
std::size_t predict(const ModelSnapshot& model, std::span<const float> input);

/// Post-ReLU values of every hidden layer, concatenated in layer order.
std::vector<float> hidden_activations(const ModelSnapshot& model, std::span<const float> input);

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 1;
  int batch_size = 32;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainOutcome {
  ModelSnapshot model;
  double training_loss = 0.0;  // mean cross-entropy over the final epoch
  double duration_seconds = 0.0;
};

/// Mini-batch SGD on softmax cross-entropy plus 0.5 * weight_decay * |W|^2
/// (weight matrices only). Shuffle order is a function of cfg.seed.
TrainOutcome train_local(const ModelSnapshot& model, const LabeledDataset& data,
                         const TrainConfig& cfg, const Clock& clock = steady_clock());

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // flat parameter order
};

/// Mean cross-entropy over the given examples plus the L2 term, and its
/// gradient with respect to every parameter.
LossAndGradient loss_and_gradient(const ModelSnapshot& model, std::span<const Tensor> inputs,
                                  std::span<const std::size_t> labels, double weight_decay);

/// Mean cross-entropy without any regularization.
double mean_cross_entropy(const ModelSnapshot& model, const LabeledDataset& data);

struct InputShape {
  std::vector<std::size_t> dims;

  void validate() const;
  std::size_t fan_in() const { return shape_product(dims); }
};

/// i.i.d. normal(0, sqrt(2 / fan_in)) elements.
Tensor kaiming_random_input(const InputShape& shape, std::uint64_t seed);

}  // namespace fldebug::model
