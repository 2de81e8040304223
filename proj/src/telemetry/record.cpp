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

#include "fldebug/telemetry/record.hpp"

#include <bit>
#include <cstdint>

#include "fldebug/error.hpp"
#include "fldebug/fl/fedavg.hpp"

namespace fldebug::telemetry {

std::string to_string(Weighting w) { return w == Weighting::kUniform ? "uniform" : "dataset_size"; }

Weighting parse_weighting(const std::string& text) {
  if (text == "uniform") return Weighting::kUniform;
  if (text == "dataset_size") return Weighting::kDatasetSize;
  fail(ErrorCode::kInvalidArgument, "unknown weighting '" + text + "'");
}

std::string main_ref(RoundId round) { return "main:" + std::to_string(round); }

std::string branch_ref(const std::string& branch, RoundId round) {
  return "branch:" + branch + ":" + std::to_string(round);
}

void RoundRecord::validate() const {
  require(global_snapshot != nullptr, "round record: missing global snapshot");
  require(client_snapshots.size() == participant_ids.size() && client_metrics.size() == participant_ids.size(),
          "round record: snapshot/metric keys must match participants");
  for (std::size_t i = 0; i < participant_ids.size(); ++i) {
    const ClientId c = participant_ids[i];
    for (std::size_t j = 0; j < i; ++j)
      require(participant_ids[j] != c, "round record: duplicate participant " + std::to_string(c));
    auto s = client_snapshots.find(c);
    require(s != client_snapshots.end() && s->second, "round record: no snapshot for client " + std::to_string(c));
    require(client_metrics.count(c) == 1, "round record: no metrics for client " + std::to_string(c));
    require(s->second->arch() == global_snapshot->arch(), "round record: client arch differs from global");
  }
}

std::vector<double> RoundRecord::aggregation_weights() const {
  std::vector<double> w;
  w.reserve(participant_ids.size());
  for (ClientId c : participant_ids) {
    w.push_back(weighting == Weighting::kUniform
                    ? 1.0
                    : static_cast<double>(client_metrics.at(c).dataset_size));
  }
  return w;
}

model::ModelSnapshot RoundRecord::aggregate_prefix(std::size_t k) const {
  require(k >= 1 && k <= participant_ids.size(), "aggregate_prefix: k out of range");
  std::vector<const model::ModelSnapshot*> ptrs;
  for (std::size_t i = 0; i < k; ++i) ptrs.push_back(client_snapshots.at(participant_ids[i]).get());
  auto w = aggregation_weights();
  w.resize(k);
  return fl::fedavg(ptrs, w);
}

bool RoundRecord::bit_equal(const RoundRecord& o) const {
  if (round_id != o.round_id || participant_ids != o.participant_ids || base_ref != o.base_ref ||
      weighting != o.weighting || client_metrics != o.client_metrics ||
      std::bit_cast<std::uint64_t>(aggregation_duration) != std::bit_cast<std::uint64_t>(o.aggregation_duration))
    return false;
  if (!global_snapshot || !o.global_snapshot || !global_snapshot->bit_equal(*o.global_snapshot)) return false;
  for (ClientId c : participant_ids) {
    auto a = client_snapshots.find(c);
    auto b = o.client_snapshots.find(c);
    if (a == client_snapshots.end() || b == o.client_snapshots.end() || !a->second->bit_equal(*b->second))
      return false;
  }
  return true;
}

}  // namespace fldebug::telemetry
