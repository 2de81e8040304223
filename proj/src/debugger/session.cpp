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

#include "fldebug/debugger/session.hpp"

#include <utility>

#include "fldebug/error.hpp"

namespace fldebug::debugger {

std::string Breakpoint::to_string() const {
  std::string out = "round " + std::to_string(round_id);
  if (client_id) out += " client " + std::to_string(*client_id);
  return out;
}

std::string to_string(Granularity g) { return g == Granularity::kRound ? "ROUND" : "CLIENT"; }

std::string to_string(SessionMode m) { return m == SessionMode::kAttachedLive ? "ATTACHED_LIVE" : "DETACHED"; }

std::string to_string(FixMode m) { return m == FixMode::kReaggregate ? "reaggregate" : "retrain"; }

FixMode parse_fix_mode(const std::string& text) {
  if (text == "reaggregate" || text == "REAGGREGATE") return FixMode::kReaggregate;
  if (text == "retrain" || text == "RETRAIN") return FixMode::kRetrain;
  fail(ErrorCode::kInvalidArgument, "unknown fix mode '" + text + "' (expected reaggregate or retrain)");
}

void DebugCursor::validate() const {
  require((granularity == Granularity::kClient) == client_position.has_value(),
          "cursor: client_position must be set exactly at CLIENT granularity");
}

std::string DebugCursor::to_string() const {
  std::string out = debugger::to_string(granularity) + "(" + std::to_string(round_index);
  if (client_position) out += ", " + std::to_string(*client_position);
  return out + ")";
}

telemetry::SnapshotPtr partial_global(const telemetry::TelemetryStore& store, const telemetry::RoundRecord& rec,
                                      std::size_t position) {
  require(position <= rec.participant_ids.size(), "partial_global: position past the last participant");
  if (position == 0) return store.incoming_global(rec);
  if (position == rec.participant_ids.size()) return rec.global_snapshot;
  return std::make_shared<const model::ModelSnapshot>(rec.aggregate_prefix(position));
}

DebugSession::DebugSession(telemetry::TelemetryStore store, DebugCursor at, SessionOptions options)
    : store_(std::move(store)), options_(std::move(options)), cursor_(at) {
  at.validate();
  if (!store_.has_round(at.round_index))
    fail(ErrorCode::kNotFound, "round " + std::to_string(at.round_index) + " is not committed");
  if (at.client_position && *at.client_position > participant_count(at.round_index))
    fail(ErrorCode::kInvalidArgument, "cursor position past the round's participants");
}

std::shared_ptr<DebugSession> open_session(const telemetry::TelemetryStore& store, DebugCursor at,
                                           SessionOptions options) {
  return std::make_shared<DebugSession>(store, at, std::move(options));
}

std::size_t DebugSession::participant_count(RoundId r) const {
  return store_.load_round(r)->participant_ids.size();
}

StateView DebugSession::make_view(const DebugCursor& c) const {
  const auto rec = store_.load_round(c.round_index);
  StateView v;
  v.cursor = c;
  v.timeline = store_.timeline();
  v.participants = rec->participant_ids;
  for (ClientId id : rec->participant_ids) v.metrics.push_back(rec->client_metrics.at(id));
  v.partial_global = c.granularity == Granularity::kRound ? rec->global_snapshot
                                                          : partial_global(store_, *rec, *c.client_position);
  v.partial_digest = v.partial_global->digest();
  if (options_.evaluator) v.test_accuracy = options_.evaluator(*v.partial_global);
  return v;
}

void DebugSession::check_open(const char* op) const {
  if (closed_) fail(ErrorCode::kConflict, std::string(op) + ": session is closed");
}

StateView DebugSession::view() const {
  std::lock_guard lock(mu_);
  return make_view(cursor_);
}

DebugCursor DebugSession::cursor() const {
  std::lock_guard lock(mu_);
  return cursor_;
}

bool DebugSession::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool DebugSession::fixed() const {
  std::lock_guard lock(mu_);
  return fixed_;
}

telemetry::TelemetryStore DebugSession::store() const {
  std::lock_guard lock(mu_);
  return store_;
}

void DebugSession::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
}

StepResult DebugSession::move_to(const DebugCursor& c) {
  cursor_ = c;
  return {make_view(c), false, ""};
}

StepResult DebugSession::step_next() {
  std::lock_guard lock(mu_);
  check_open("step_next");
  const RoundId r = cursor_.round_index;
  const bool last_round = !store_.has_round(r + 1);
  if (cursor_.granularity == Granularity::kRound) {
    if (last_round) return {make_view(cursor_), true, "already at the latest committed round"};
    return move_to(DebugCursor::round(r + 1));
  }
  const std::size_t k = *cursor_.client_position;
  if (k < participant_count(r)) return move_to(DebugCursor::client(r, k + 1));
  if (last_round) return {make_view(cursor_), true, "already after the last client of the latest committed round"};
  return move_to(DebugCursor::client(r + 1, 0));
}

StepResult DebugSession::step_back() {
  std::lock_guard lock(mu_);
  check_open("step_back");
  const RoundId r = cursor_.round_index;
  const bool first_round = r == store_.first_round();
  if (cursor_.granularity == Granularity::kRound) {
    if (first_round) return {make_view(cursor_), true, "already at the first round"};
    return move_to(DebugCursor::round(r - 1));
  }
  const std::size_t k = *cursor_.client_position;
  if (k > 0) return move_to(DebugCursor::client(r, k - 1));
  if (first_round) return {make_view(cursor_), true, "already before the first client of the first round"};
  return move_to(DebugCursor::client(r - 1, participant_count(r - 1)));
}

StepResult DebugSession::step_in() {
  std::lock_guard lock(mu_);
  check_open("step_in");
  if (cursor_.granularity == Granularity::kClient) return {make_view(cursor_), false, "already at client granularity"};
  const RoundId r = cursor_.round_index;
  return move_to(DebugCursor::client(r, std::min<std::size_t>(1, participant_count(r))));
}

StepResult DebugSession::step_out() {
  std::lock_guard lock(mu_);
  check_open("step_out");
  if (cursor_.granularity == Granularity::kRound) return {make_view(cursor_), false, "already at round granularity"};
  return move_to(DebugCursor::round(cursor_.round_index));
}

ResumeSummary DebugSession::resume(const std::function<void(const StateView&)>& on_round) {
  std::lock_guard lock(mu_);
  check_open("resume");
  if (fixed_) fail(ErrorCode::kFailedPrecondition, "resume: a fix was applied in this session; the corrected timeline is already adopted");
  ResumeSummary summary;
  summary.from_round = cursor_.round_index;
  RoundId r = cursor_.round_index;
  for (;;) {
    cursor_ = DebugCursor::round(r);
    if (on_round) on_round(make_view(cursor_));
    ++summary.rounds_replayed;
    // The live run may commit more rounds while we replay.
    if (!store_.has_round(r + 1)) break;
    ++r;
  }
  summary.to_round = r;
  closed_ = true;
  return summary;
}

FixSummary DebugSession::fix_and_replay(const FixRequest& request) {
  std::lock_guard lock(mu_);
  check_open("fix_and_replay");
  require(!request.faulty.empty(), "fix_and_replay: faulty set is empty");
  if (!store_.has_round(request.from_round))
    fail(ErrorCode::kNotFound, "fix_and_replay: round " + std::to_string(request.from_round) + " is not committed");
  std::set<ClientId> seen;
  for (RoundId r = store_.first_round(); store_.has_round(r); ++r)
    for (ClientId c : store_.load_round(r)->participant_ids) seen.insert(c);
  for (ClientId c : request.faulty)
    if (!seen.count(c)) fail(ErrorCode::kInvalidArgument, "fix_and_replay: client " + std::to_string(c) + " never participated");

  const std::string name = request.branch_name.empty() ? next_branch_name(store_) : request.branch_name;
  const RoundId last_original = *store_.latest_round();
  FixSummary summary;
  if (request.mode == FixMode::kReaggregate) {
    summary = reaggregate(store_, request.faulty, request.from_round, name);
  } else {
    std::shared_ptr<const fl::Simulator> sim = options_.simulator;
    if (!sim) sim = std::make_shared<const fl::Simulator>(fl::parse_session_config(store_.metadata_yaml()));
    summary = retrain(store_, *sim, request.faulty, request.from_round, name);
  }
  if (options_.evaluator) {
    summary.original_accuracy = options_.evaluator(*store_.load_round(last_original)->global_snapshot);
    summary.corrected_accuracy = options_.evaluator(*summary.final_global);
  }
  if (request.bar_faulty) summary.barred = request.faulty;

  telemetry::TelemetryStore branch = store_.open_branch(name);
  if (options_.adopter) {
    options_.adopter->adopt(branch, summary.barred);
  } else {
    store_.set_head(name);
  }
  summary.adopted = true;
  store_ = branch;
  cursor_ = DebugCursor::round(request.from_round);
  fixed_ = true;
  return summary;
}

}  // namespace fldebug::debugger
