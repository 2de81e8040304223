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

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "fldebug/faultloc/selection.hpp"

namespace fldebug::faultloc {

struct LocalizationConfig {
  float activation_threshold = model::kDefaultActivationThreshold;

  void validate() const;
};

/// Activation profiles keyed by (snapshot digest, input digest, threshold).
/// Internally synchronized.
class ProfileCache {
 public:
  const model::ActivationProfile* find(const std::string& model_digest, const std::string& input_digest,
                                       float threshold) const;
  void insert(const std::string& model_digest, const std::string& input_digest, float threshold,
              model::ActivationProfile profile);
  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, std::string, std::uint32_t>;
  mutable std::mutex mu_;
  std::map<Key, model::ActivationProfile> entries_;
};

/// One profile per client, in the order given. `forward_passes`, when set,
/// is incremented once per forward pass actually executed.
std::vector<model::ActivationProfile> activation_sets(std::span<const ClientModel> clients,
                                                      const model::Tensor& input, float threshold,
                                                      ProfileCache* cache = nullptr,
                                                      std::size_t* forward_passes = nullptr);

/// Size of the intersection of the given profiles.
std::size_t common_activation_count(std::span<const model::ActivationProfile* const> profiles);

struct InputLocalization {
  ClientId accused = 0;
  std::size_t max_common_activations = 0;
  bool tie = false;
  std::size_t forward_passes = 0;
  /// Common-activation count of each leave-one-out subset, indexed like the
  /// clients sorted by ascending id.
  std::vector<std::size_t> subset_common;
  std::vector<ClientId> excluded_order;
};

/// Leave-one-out differential test on one input: the (n-1)-subset with the
/// largest common activation set is taken as benign and the excluded
/// client is accused. Ties go to the lowest excluded id and are flagged.
InputLocalization localize_on_input(std::span<const ClientModel> clients, const model::Tensor& input,
                                    const LocalizationConfig& cfg, ProfileCache* cache = nullptr);

struct InputVerdict {
  std::size_t input_index = 0;
  ClientId accused = 0;
  std::size_t max_common_activations = 0;
  bool tie = false;
};

struct FaultReport {
  std::vector<InputVerdict> per_input;
  ClientId verdict = 0;  // majority accused, ties to lowest id
  std::optional<double> accuracy_vs_truth;
  std::size_t forward_passes = 0;
  double seconds = 0.0;
};

/// Majority vote; ties go to the lowest id.
ClientId majority_verdict(std::span<const InputVerdict> verdicts);

/// `truth` (when non-empty) makes accuracy_vs_truth the fraction of inputs
/// whose accused client is in the set.
FaultReport localize(std::span<const ClientModel> clients, const TestSuite& suite, const LocalizationConfig& cfg,
                     const std::set<ClientId>& truth = {}, ProfileCache* cache = nullptr);

struct MultiFaultResult {
  std::vector<ClientId> accused;  // in removal order
  bool partial = false;
  std::string note;
  std::vector<FaultReport> iterations;
};

/// Localizes, removes the verdict client, and repeats k times with a fresh
/// suite per iteration. Stops early (partial) when fewer than 3 clients
/// remain or no suite can be built.
MultiFaultResult localize_multi(std::span<const ClientModel> clients, const SelectionConfig& selection,
                                const LocalizationConfig& cfg, std::size_t num_faults);

struct ThresholdPoint {
  float threshold = 0.0f;
  double accuracy = 0.0;
  std::size_t ties = 0;
  ClientId verdict = 0;
};

std::vector<ThresholdPoint> threshold_sweep(std::span<const ClientModel> clients, const TestSuite& suite,
                                            std::span<const float> thresholds, const std::set<ClientId>& truth);

}  // namespace fldebug::faultloc
