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
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fldebug/fl/session.hpp"
#include "fldebug/telemetry/store.hpp"

namespace fldebug::debugger {

struct Breakpoint {
  RoundId round_id = 0;
  std::optional<ClientId> client_id;

  std::string to_string() const;
  friend auto operator<=>(const Breakpoint&, const Breakpoint&) = default;
};

enum class Granularity { kRound, kClient };

std::string to_string(Granularity g);

struct DebugCursor {
  RoundId round_index = 0;
  Granularity granularity = Granularity::kRound;
  /// Number of participants already folded into the partial global.
  std::optional<std::size_t> client_position;

  static DebugCursor round(RoundId r) { return {r, Granularity::kRound, std::nullopt}; }
  static DebugCursor client(RoundId r, std::size_t position) { return {r, Granularity::kClient, position}; }

  void validate() const;
  std::string to_string() const;
  friend bool operator==(const DebugCursor&, const DebugCursor&) = default;
};

struct StateView {
  DebugCursor cursor;
  std::string timeline;
  std::vector<ClientId> participants;
  std::vector<ClientMetrics> metrics;  // participant order
  telemetry::SnapshotPtr partial_global;
  std::string partial_digest;
  std::optional<double> test_accuracy;
};

enum class SessionMode { kAttachedLive, kDetached };

std::string to_string(SessionMode m);

struct StepResult {
  StateView view;
  /// The step would have left the committed range; the cursor did not move.
  bool boundary = false;
  std::string notice;
};

struct ResumeSummary {
  RoundId from_round = 0;
  RoundId to_round = 0;
  std::size_t rounds_replayed = 0;
};

enum class FixMode { kReaggregate, kRetrain };

std::string to_string(FixMode m);
FixMode parse_fix_mode(const std::string& text);

struct FixRequest {
  std::set<ClientId> faulty;
  RoundId from_round = 0;
  FixMode mode = FixMode::kReaggregate;
  /// Keep the faulty clients out of every later live round.
  bool bar_faulty = true;
  /// Empty picks "fix-<n>".
  std::string branch_name;
};

struct FixSummary {
  std::string branch;
  FixMode mode = FixMode::kReaggregate;
  RoundId from_round = 0;
  RoundId last_round = 0;
  std::vector<std::string> warnings;
  telemetry::SnapshotPtr final_global;
  std::string final_digest;
  std::optional<double> original_accuracy;
  std::optional<double> corrected_accuracy;
  std::set<ClientId> barred;
  bool adopted = false;
};

using Evaluator = std::function<double(const model::ModelSnapshot&)>;

/// Receives a corrected timeline. The live coordinator switches its
/// current global (and round sink) to the branch head.
class TimelineAdopter {
 public:
  virtual ~TimelineAdopter() = default;
  virtual void adopt(const telemetry::TelemetryStore& branch, const std::set<ClientId>& barred) = 0;
};

struct SessionOptions {
  SessionMode mode = SessionMode::kDetached;
  Evaluator evaluator;
  std::shared_ptr<TimelineAdopter> adopter;
  /// Used by RETRAIN; rebuilt from the store's session metadata when unset.
  std::shared_ptr<const fl::Simulator> simulator;
};

/// Read-only replay cursor over committed rounds of one timeline.
/// Operations are serialized internally.
class DebugSession {
 public:
  DebugSession(telemetry::TelemetryStore store, DebugCursor at, SessionOptions options = {});

  StateView view() const;
  DebugCursor cursor() const;
  SessionMode mode() const { return options_.mode; }
  bool closed() const;
  bool fixed() const;
  telemetry::TelemetryStore store() const;

  StepResult step_next();
  StepResult step_back();
  StepResult step_in();
  StepResult step_out();

  /// Walks every committed round from the cursor to the latest one, calling
  /// `on_round` for each, then closes the session.
  ResumeSummary resume(const std::function<void(const StateView&)>& on_round = {});

  /// Writes a corrected timeline as a new branch and hands it to the
  /// adopter (or moves HEAD when detached). The session then views the
  /// branch and can no longer be resumed.
  FixSummary fix_and_replay(const FixRequest& request);

  void close();

 private:
  StateView make_view(const DebugCursor& c) const;
  std::size_t participant_count(RoundId r) const;
  void check_open(const char* op) const;
  StepResult move_to(const DebugCursor& c);

  mutable std::mutex mu_;
  telemetry::TelemetryStore store_;
  SessionOptions options_;
  DebugCursor cursor_;
  bool closed_ = false;
  bool fixed_ = false;
};

/// Opens a session at a committed round; not_found otherwise.
std::shared_ptr<DebugSession> open_session(const telemetry::TelemetryStore& store, DebugCursor at,
                                           SessionOptions options = {});

/// Partial aggregate after `position` participants of the round.
telemetry::SnapshotPtr partial_global(const telemetry::TelemetryStore& store, const telemetry::RoundRecord& rec,
                                      std::size_t position);

/// Corrected timeline without retraining: each round from `from_round`
/// re-averages its recorded non-faulty snapshots.
FixSummary reaggregate(const telemetry::TelemetryStore& source, const std::set<ClientId>& faulty, RoundId from_round,
                       const std::string& branch_name);

/// Corrected timeline by re-running training from `from_round` with the
/// faulty clients excluded from selection.
FixSummary retrain(const telemetry::TelemetryStore& source, const fl::Simulator& sim,
                   const std::set<ClientId>& faulty, RoundId from_round, const std::string& branch_name);

/// First unused "fix-<n>".
std::string next_branch_name(const telemetry::TelemetryStore& store);

}  // namespace fldebug::debugger
