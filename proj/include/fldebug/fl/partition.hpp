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
#include <cstdint>
#include <string>
#include <vector>

#include "fldebug/dataset.hpp"

namespace fldebug::fl {

enum class PartitionMode { kIid, kNonIidQuantity };

std::string to_string(PartitionMode mode);
PartitionMode parse_partition_mode(const std::string& text);  // "iid" | "noniid"

struct PartitionPlan {
  PartitionMode mode = PartitionMode::kIid;
  std::size_t num_clients = 10;
  std::uint64_t seed = 0;
  double min_fraction = 0.3;  // NONIID_QUANTITY only

  void validate() const;
  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

/// Disjoint index sets covering [0, dataset_size).
std::vector<std::vector<std::size_t>> partition_indices(std::size_t dataset_size,
                                                        const PartitionPlan& plan);

std::vector<LabeledDataset> partition(const LabeledDataset& dataset, const PartitionPlan& plan);

/// Replaces exactly round(noise_rate * |shard|) labels, each with a class
/// different from the original.
LabeledDataset inject_label_noise(const LabeledDataset& shard, double noise_rate, std::uint64_t seed);

}  // namespace fldebug::fl
