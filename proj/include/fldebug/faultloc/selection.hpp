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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fldebug/fl/types.hpp"
#include "fldebug/model/mlp.hpp"
#include "fldebug/telemetry/record.hpp"

namespace fldebug::faultloc {

/// A participant's model as seen by the aggregator.
struct ClientModel {
  ClientId id = 0;
  telemetry::SnapshotPtr snapshot;
};

/// Participants of a recorded round, in participant order.
std::vector<ClientModel> clients_of(const telemetry::RoundRecord& record);

struct SelectionConfig {
  std::size_t kappa = 10;
  /// Minimum number of agreeing clients. Unset means min(5, ceil(n / 2)).
  std::optional<std::size_t> eta;
  std::size_t pool_batch = 1000;
  std::size_t max_attempts = 50000;
  model::InputShape shape;  // empty dims: use the models' input dim
  std::uint64_t seed = 0;

  std::size_t resolved_eta(std::size_t num_clients) const;
  void validate(std::size_t num_clients) const;
};

struct SelectedInput {
  model::Tensor input;
  std::uint64_t seed = 0;             // kaiming_random_input seed
  std::size_t attempt = 0;            // 0-based candidate index
  std::size_t label = 0;              // agreed prediction
  std::vector<ClientId> agreeing;     // ascending ids
};

struct TestSuite {
  std::vector<SelectedInput> entries;
  std::size_t attempts = 0;  // candidates examined
  bool partial = false;      // stopped at max_attempts before kappa inputs
  std::string warning;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Inference-guided selection: keeps random inputs on which a previously
/// unseen set of at least eta clients agrees on one predicted label.
/// Throws kFailedPrecondition when no input qualifies within max_attempts.
TestSuite select_test_inputs(std::span<const ClientModel> clients, const SelectionConfig& cfg);

/// Clients predicting `label` on `input`, ascending ids.
std::vector<ClientId> same_prediction_clients(std::span<const ClientModel> clients,
                                              std::span<const std::size_t> predictions, std::size_t label);

}  // namespace fldebug::faultloc
