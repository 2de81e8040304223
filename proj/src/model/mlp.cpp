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

#include "fldebug/model/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

#include "fldebug/digest.hpp"
#include "fldebug/error.hpp"
#include "fldebug/seed.hpp"

namespace fldebug {

const Clock& steady_clock() {
  static const SteadyClock clock;
  return clock;
}

void LabeledDataset::validate() const {
  require(inputs.size() == labels.size(), "dataset: inputs and labels differ in length");
  require(num_classes >= 1, "dataset: num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < num_classes, "dataset: label out of range at index " + std::to_string(i));
    require(inputs[i].shape() == inputs.front().shape(), "dataset: inputs differ in shape");
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

}  // namespace fldebug

namespace fldebug::model {

std::size_t shape_product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(!shape_.empty(), "tensor: empty shape");
  for (std::size_t d : shape_) require(d > 0, "tensor: zero-sized dimension");
  require(shape_product(shape_) == data_.size(), "tensor: shape does not match data length");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------- ModelArch

void ModelArch::validate() const {
  require(layer_sizes.size() >= 2, "arch: need at least input and output layers");
  for (std::size_t s : layer_sizes) require(s > 0, "arch: layer sizes must be positive");
}

std::size_t ModelArch::hidden_neuron_count() const {
  if (layer_sizes.size() < 3) return 0;
  return std::accumulate(layer_sizes.begin() + 1, layer_sizes.end() - 1, std::size_t{0});
}

std::size_t ModelArch::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1];
  return n;
}

std::size_t ModelArch::weight_offset(std::size_t layer) const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer; ++l)
    n += layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1];
  return n;
}

std::string ModelArch::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(layer_sizes[i]);
  }
  return out;
}

ModelArch ModelArch::parse(const std::string& text) {
  ModelArch arch;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      require(pos == item.size() && v > 0, "arch: bad layer size '" + item + "'");
      arch.layer_sizes.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      fail(ErrorCode::kInvalidArgument, "arch: bad layer size '" + item + "'");
    }
  }
  arch.validate();
  return arch;
}

// ------------------------------------------------------------ ModelSnapshot

ModelSnapshot::ModelSnapshot(ModelArch arch, std::vector<float> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.validate();
  require(params_.size() == arch_.param_count(), "snapshot: parameter count does not match arch");
}

ModelSnapshot ModelSnapshot::zeros(const ModelArch& arch) {
  arch.validate();
  return ModelSnapshot(arch, std::vector<float>(arch.param_count(), 0.0f));
}

std::span<const float> ModelSnapshot::weights(std::size_t l) const {
  const auto& s = arch_.layer_sizes;
  return std::span<const float>(params_).subspan(arch_.weight_offset(l), s[l + 1] * s[l]);
}

std::span<float> ModelSnapshot::weights(std::size_t l) {
  const auto& s = arch_.layer_sizes;
  return std::span<float>(params_).subspan(arch_.weight_offset(l), s[l + 1] * s[l]);
}

std::span<const float> ModelSnapshot::bias(std::size_t l) const {
  const auto& s = arch_.layer_sizes;
  return std::span<const float>(params_).subspan(arch_.weight_offset(l) + s[l + 1] * s[l],
                                                 s[l + 1]);
}

std::span<float> ModelSnapshot::bias(std::size_t l) {
  const auto& s = arch_.layer_sizes;
  return std::span<float>(params_).subspan(arch_.weight_offset(l) + s[l + 1] * s[l], s[l + 1]);
}

std::string ModelSnapshot::digest() const {
  std::vector<std::uint64_t> header(arch_.layer_sizes.begin(), arch_.layer_sizes.end());
  header.insert(header.begin(), header.size());
  std::vector<std::byte> bytes(header.size() * sizeof(std::uint64_t) +
                               params_.size() * sizeof(float));
  std::memcpy(bytes.data(), header.data(), header.size() * sizeof(std::uint64_t));
  std::memcpy(bytes.data() + header.size() * sizeof(std::uint64_t), params_.data(),
              params_.size() * sizeof(float));
  return sha256_hex(bytes);
}

bool ModelSnapshot::bit_equal(const ModelSnapshot& other) const {
  return arch_ == other.arch_ && params_.size() == other.params_.size() &&
         std::memcmp(params_.data(), other.params_.data(), params_.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------- profiles

bool ActivationProfile::contains(NeuronId id) const {
  return std::binary_search(active.begin(), active.end(), id);
}

bool ActivationProfile::is_subset_of(const ActivationProfile& other) const {
  return std::includes(other.active.begin(), other.active.end(), active.begin(), active.end());
}

std::size_t argmax(std::span<const float> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

// ------------------------------------------------------------------ forward

namespace {

void check_input(const ModelSnapshot& model, std::size_t n) {
  if (n != model.arch().input_dim()) {
    fail(ErrorCode::kInvalidArgument, "forward: input has " + std::to_string(n) +
                                          " elements, model expects " +
                                          std::to_string(model.arch().input_dim()));
  }
}

// Runs the network, storing every hidden layer's post-ReLU output in
// `hidden` (concatenated) and the logits in `logits`.
void run_layers(const ModelSnapshot& model, std::span<const float> input, std::vector<float>& hidden,
                std::vector<float>& logits) {
  const auto& sizes = model.arch().layer_sizes;
  const std::size_t layers = sizes.size() - 1;
  hidden.resize(model.arch().hidden_neuron_count());
  logits.resize(sizes.back());
  std::span<const float> in = input;
  std::size_t hidden_offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto w = model.weights(l);
    const auto b = model.bias(l);
    const std::size_t rows = sizes[l + 1];
    const std::size_t cols = sizes[l];
    const bool is_hidden = l + 1 < layers;
    float* out = is_hidden ? hidden.data() + hidden_offset : logits.data();
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = b[r];
      const float* row = w.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * in[c];
      const float z = static_cast<float>(acc);
      out[r] = is_hidden ? std::max(z, 0.0f) : z;
    }
    if (is_hidden) {
      in = std::span<const float>(out, rows);
      hidden_offset += rows;
    }
  }
}

}  // namespace

ForwardResult forward(const ModelSnapshot& model, const Tensor& input, float threshold) {
  check_input(model, input.size());
  std::vector<float> hidden, logits;
  run_layers(model, input.values(), hidden, logits);

  ForwardResult result;
  result.profile.threshold_used = threshold;
  const auto& sizes = model.arch().layer_sizes;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 2 < sizes.size(); ++l) {
    for (std::size_t i = 0; i < sizes[l + 1]; ++i) {
      if (hidden[offset + i] > threshold)
        result.profile.active.push_back({static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(i)});
    }
    offset += sizes[l + 1];
  }
  result.predicted_label = argmax(logits);
  const std::size_t classes = logits.size();
  result.logits = Tensor({classes}, std::move(logits));
  return result;
}

std::size_t predict(const ModelSnapshot& model, std::span<const float> input) {
  check_input(model, input.size());
  std::vector<float> hidden, logits;
  run_layers(model, input, hidden, logits);
  return argmax(logits);
}

std::vector<float> hidden_activations(const ModelSnapshot& model, std::span<const float> input) {
  check_input(model, input.size());
  std::vector<float> hidden, logits;
  run_layers(model, input, hidden, logits);
  return hidden;
}

// --------------------------------------------------------------------- init

ModelSnapshot init_model(const ModelArch& arch, std::uint64_t seed) {
  ModelSnapshot model = ModelSnapshot::zeros(arch);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    std::mt19937_64 rng(derive_seed(seed, {l}));
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(arch.layer_sizes[l])));
    for (float& w : model.weights(l)) w = static_cast<float>(dist(rng));
  }
  return model;
}

void InputShape::validate() const {
  require(!dims.empty(), "input shape: no dimensions");
  for (std::size_t d : dims) require(d > 0, "input shape: dimensions must be positive");
}

Tensor kaiming_random_input(const InputShape& shape, std::uint64_t seed) {
  shape.validate();
  const std::size_t n = shape.fan_in();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(n)));
  std::vector<float> data(n);
  for (float& v : data) v = static_cast<float>(dist(rng));
  return Tensor(shape.dims, std::move(data));
}

// ----------------------------------------------------------------- training

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "train config: learning_rate must be > 0");
  require(epochs >= 0, "train config: epochs must be >= 0");
  require(batch_size >= 1, "train config: batch_size must be >= 1");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "train config: weight_decay must be >= 0");
}

namespace {

// Cross-entropy of one example given float logits, using log-sum-exp.
double cross_entropy(std::span<const double> logits, std::size_t label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return std::max(0.0, m + std::log(s) - logits[label]);
}

// Accumulates the gradient of the mean cross-entropy over examples into
// `grad` (flat parameter order, scaled by 1/batch) and returns the summed CE.
double accumulate_batch(const ModelSnapshot& model, std::span<const Tensor* const> inputs,
                        std::span<const std::size_t> labels, std::vector<double>& grad) {
  const ModelArch& arch = model.arch();
  const auto& sizes = arch.layer_sizes;
  const std::size_t layers = arch.num_layers();
  const double scale = 1.0 / static_cast<double>(inputs.size());

  std::vector<std::vector<double>> acts(layers + 1);   // acts[0] = input
  std::vector<std::vector<double>> pre(layers);        // pre-activations
  std::vector<double> delta, next_delta;
  double total = 0.0;

  for (std::size_t e = 0; e < inputs.size(); ++e) {
    const auto x = inputs[e]->values();
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const auto w = model.weights(l);
      const auto b = model.bias(l);
      const std::size_t rows = sizes[l + 1], cols = sizes[l];
      pre[l].resize(rows);
      acts[l + 1].resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const float* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * acts[l][c];
        pre[l][r] = acc;
        acts[l + 1][r] = (l + 1 < layers) ? std::max(acc, 0.0) : acc;
      }
    }
    const std::vector<double>& logits = acts[layers];
    const std::size_t label = labels[e];
    total += cross_entropy(logits, label);

    // Softmax gradient.
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    delta.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) s += (delta[k] = std::exp(logits[k] - m));
    for (std::size_t k = 0; k < logits.size(); ++k)
      delta[k] = (delta[k] / s - (k == label ? 1.0 : 0.0)) * scale;

    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t rows = sizes[l + 1], cols = sizes[l];
      const std::size_t w_off = arch.weight_offset(l);
      const std::size_t b_off = w_off + rows * cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        double* g = grad.data() + w_off + r * cols;
        for (std::size_t c = 0; c < cols; ++c) g[c] += d * acts[l][c];
        grad[b_off + r] += d;
      }
      if (l == 0) break;
      const auto w = model.weights(l);
      next_delta.assign(cols, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const float* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) next_delta[c] += d * row[c];
      }
      for (std::size_t c = 0; c < cols; ++c)
        if (!(pre[l - 1][c] > 0.0)) next_delta[c] = 0.0;
      delta.swap(next_delta);
    }
  }
  return total;
}

double l2_term(const ModelSnapshot& model, double weight_decay, std::vector<double>* grad) {
  if (weight_decay == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t l = 0; l < model.arch().num_layers(); ++l) {
    const std::size_t off = model.arch().weight_offset(l);
    const auto w = model.weights(l);
    for (std::size_t i = 0; i < w.size(); ++i) {
      sum += static_cast<double>(w[i]) * w[i];
      if (grad) (*grad)[off + i] += weight_decay * w[i];
    }
  }
  return 0.5 * weight_decay * sum;
}

}  // namespace

LossAndGradient loss_and_gradient(const ModelSnapshot& model, std::span<const Tensor> inputs,
                                  std::span<const std::size_t> labels, double weight_decay) {
  require(!inputs.empty() && inputs.size() == labels.size(), "loss_and_gradient: bad batch");
  for (const Tensor& t : inputs) check_input(model, t.size());
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : inputs) ptrs.push_back(&t);
  LossAndGradient out;
  out.gradient.assign(model.arch().param_count(), 0.0);
  const double ce = accumulate_batch(model, ptrs, labels, out.gradient);
  out.loss = ce / static_cast<double>(inputs.size()) + l2_term(model, weight_decay, &out.gradient);
  return out;
}

double mean_cross_entropy(const ModelSnapshot& model, const LabeledDataset& data) {
  require(!data.empty(), "mean_cross_entropy: empty dataset");
  std::vector<float> hidden, logits;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    check_input(model, data.inputs[i].size());
    run_layers(model, data.inputs[i].values(), hidden, logits);
    std::vector<double> z(logits.begin(), logits.end());
    total += cross_entropy(z, data.labels[i]);
  }
  return total / static_cast<double>(data.size());
}

TrainOutcome train_local(const ModelSnapshot& model, const LabeledDataset& data,
                         const TrainConfig& cfg, const Clock& clock) {
  cfg.validate();
  require(!data.empty(), "train_local: empty dataset");
  require(data.input_dim() == model.arch().input_dim(), "train_local: input dim does not match arch");
  require(data.num_classes <= model.arch().num_classes(), "train_local: more classes than outputs");

  const double start = clock.now_seconds();
  TrainOutcome out;
  out.model = model;
  if (cfg.epochs == 0) {
    out.training_loss = mean_cross_entropy(model, data);
    out.duration_seconds = std::max(0.0, clock.now_seconds() - start);
    return out;
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(model.arch().param_count());
  std::vector<const Tensor*> batch_inputs;
  std::vector<std::size_t> batch_labels;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  auto params = out.model.params();

  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      batch_inputs.clear();
      batch_labels.clear();
      for (std::size_t i = begin; i < end; ++i) {
        batch_inputs.push_back(&data.inputs[order[i]]);
        batch_labels.push_back(data.labels[order[i]]);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      epoch_loss += accumulate_batch(out.model, batch_inputs, batch_labels, grad);
      l2_term(out.model, cfg.weight_decay, &grad);
      for (std::size_t p = 0; p < params.size(); ++p)
        params[p] = static_cast<float>(static_cast<double>(params[p]) - cfg.learning_rate * grad[p]);
    }
    epoch_loss /= static_cast<double>(order.size());
  }
  for (float v : params) {
    if (!std::isfinite(v)) fail(ErrorCode::kFailedPrecondition, "train_local: training diverged (non-finite weights)");
  }
  out.training_loss = epoch_loss;
  out.duration_seconds = std::max(0.0, clock.now_seconds() - start);
  return out;
}

}  // namespace fldebug::model
