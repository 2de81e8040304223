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
#include <memory>
#include <string>
#include <vector>

#include "fldebug/fl/types.hpp"
#include "fldebug/model/mlp.hpp"

namespace fldebug::telemetry {

using SnapshotPtr = std::shared_ptr<const model::ModelSnapshot>;

enum class Weighting { kDatasetSize, kUniform };

std::string to_string(Weighting w);
Weighting parse_weighting(const std::string& text);

/// Everything the aggregator observed in one round.
struct RoundRecord {
  RoundId round_id = 0;
  std::vector<ClientId> participant_ids;  // aggregation order
  std::map<ClientId, SnapshotPtr> client_snapshots;
  std::map<ClientId, ClientMetrics> client_metrics;
  SnapshotPtr global_snapshot;
  double aggregation_duration = 0.0;
  /// Where the incoming global came from: "genesis", "main:<round>" or
  /// "branch:<name>:<round>".
  std::string base_ref = "genesis";
  Weighting weighting = Weighting::kDatasetSize;

  /// Key sets match the participants and all snapshots share one arch.
  void validate() const;

  /// Aggregation weights in participant order.
  std::vector<double> aggregation_weights() const;

  /// Weighted average of the first k participants' snapshots (k >= 1).
  model::ModelSnapshot aggregate_prefix(std::size_t k) const;

  bool bit_equal(const RoundRecord& other) const;
};

std::string main_ref(RoundId round);
std::string branch_ref(const std::string& branch, RoundId round);

/// Consumer of committed rounds (the telemetry store, or a test double).
class RoundSink {
 public:
  virtual ~RoundSink() = default;
  virtual RoundId record_round(const RoundRecord& record) = 0;
};

}  // namespace fldebug::telemetry
