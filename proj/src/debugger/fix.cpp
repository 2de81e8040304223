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

#include <algorithm>
#include <utility>

#include "fldebug/debugger/session.hpp"
#include "fldebug/error.hpp"

namespace fldebug::debugger {

namespace {

telemetry::RoundRecord carried_round(RoundId r, telemetry::SnapshotPtr previous, const std::string& base_ref,
                                     telemetry::Weighting weighting) {
  telemetry::RoundRecord out;
  out.round_id = r;
  out.global_snapshot = std::move(previous);
  out.base_ref = base_ref;
  out.weighting = weighting;
  return out;
}

void finish(FixSummary& summary, const telemetry::RoundRecord& last) {
  summary.last_round = last.round_id;
  summary.final_global = last.global_snapshot;
  summary.final_digest = last.global_snapshot->digest();
}

}  // namespace

std::string next_branch_name(const telemetry::TelemetryStore& store) {
  const auto existing = store.branches();
  for (std::size_t n = 1;; ++n) {
    std::string name = "fix-" + std::to_string(n);
    if (std::find(existing.begin(), existing.end(), name) == existing.end()) return name;
  }
}

FixSummary reaggregate(const telemetry::TelemetryStore& source, const std::set<ClientId>& faulty, RoundId from_round,
                       const std::string& branch_name) {
  const auto latest = source.latest_round();
  if (!latest || !source.has_round(from_round))
    fail(ErrorCode::kNotFound, "reaggregate: round " + std::to_string(from_round) + " is not committed");
  telemetry::TelemetryStore branch = source.create_branch(branch_name, from_round);
  FixSummary summary;
  summary.branch = branch_name;
  summary.mode = FixMode::kReaggregate;
  summary.from_round = from_round;

  telemetry::SnapshotPtr previous;
  telemetry::RoundRecord last;
  for (RoundId r = from_round; r <= *latest; ++r) {
    const auto original = source.load_round(r);
    const std::string base_ref = r == from_round ? original->base_ref : telemetry::branch_ref(branch_name, r - 1);
    if (!previous) previous = source.incoming_global(*original);

    telemetry::RoundRecord rec;
    rec.round_id = r;
    rec.base_ref = base_ref;
    rec.weighting = original->weighting;
    for (ClientId c : original->participant_ids) {
      if (faulty.count(c)) continue;
      rec.participant_ids.push_back(c);
      rec.client_snapshots[c] = original->client_snapshots.at(c);
      rec.client_metrics[c] = original->client_metrics.at(c);
    }
    if (rec.participant_ids.empty()) {
      summary.warnings.push_back("round " + std::to_string(r) +
                                 ": every participant is faulty; carrying the previous global forward");
      rec = carried_round(r, previous, base_ref, original->weighting);
    } else {
      const double start = steady_clock().now_seconds();
      rec.global_snapshot = std::make_shared<const model::ModelSnapshot>(rec.aggregate_prefix(rec.participant_ids.size()));
      rec.aggregation_duration = steady_clock().now_seconds() - start;
    }
    branch.record_round(rec);
    previous = rec.global_snapshot;
    last = std::move(rec);
  }
  finish(summary, last);
  return summary;
}

FixSummary retrain(const telemetry::TelemetryStore& source, const fl::Simulator& sim,
                   const std::set<ClientId>& faulty, RoundId from_round, const std::string& branch_name) {
  const auto latest = source.latest_round();
  if (!latest || !source.has_round(from_round))
    fail(ErrorCode::kNotFound, "retrain: round " + std::to_string(from_round) + " is not committed");
  require(sim.config().arch == source.arch(), "retrain: simulator arch differs from the store");
  telemetry::TelemetryStore branch = source.create_branch(branch_name, from_round);
  FixSummary summary;
  summary.branch = branch_name;
  summary.mode = FixMode::kRetrain;
  summary.from_round = from_round;

  const auto first = source.load_round(from_round);
  telemetry::SnapshotPtr previous = source.incoming_global(*first);
  telemetry::RoundRecord last;
  for (RoundId r = from_round; r <= *latest; ++r) {
    const std::string base_ref = r == from_round ? first->base_ref : telemetry::branch_ref(branch_name, r - 1);
    const auto participants = sim.select_participants(r, faulty);
    telemetry::RoundRecord rec;
    if (participants.empty()) {
      summary.warnings.push_back("round " + std::to_string(r) + ": no eligible clients; carrying the previous global forward");
      rec = carried_round(r, previous, base_ref, sim.config().weighting);
    } else {
      rec = sim.run_round(*previous, r, participants, base_ref);
    }
    branch.record_round(rec);
    previous = rec.global_snapshot;
    last = std::move(rec);
  }
  finish(summary, last);
  return summary;
}

}  // namespace fldebug::debugger
