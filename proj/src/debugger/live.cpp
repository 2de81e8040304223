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

#include "fldebug/debugger/live.hpp"

#include <algorithm>
#include <utility>

#include "fldebug/error.hpp"

namespace fldebug::debugger {

std::shared_ptr<LiveRun> LiveRun::create(std::shared_ptr<const fl::Simulator> sim, telemetry::TelemetryStore store,
                                         LiveCallbacks callbacks, Evaluator evaluator) {
  return std::shared_ptr<LiveRun>(new LiveRun(std::move(sim), std::move(store), std::move(callbacks), std::move(evaluator)));
}

LiveRun::LiveRun(std::shared_ptr<const fl::Simulator> sim, telemetry::TelemetryStore store, LiveCallbacks callbacks,
                 Evaluator evaluator)
    : sim_(std::move(sim)), callbacks_(std::move(callbacks)), evaluator_(std::move(evaluator)), sink_(std::move(store)) {
  require(sim_ != nullptr, "live run: simulator is null");
  require(sim_->config().arch == sink_.arch(), "live run: simulator arch differs from the store");
  // Continue wherever the store's timeline ends.
  if (const auto latest = sink_.latest_round()) {
    global_ = sink_.load_round(*latest)->global_snapshot;
    base_ref_ = sink_.is_branch() ? telemetry::branch_ref(sink_.timeline(), *latest) : telemetry::main_ref(*latest);
    next_round_ = *latest + 1;
  } else {
    global_ = std::make_shared<const model::ModelSnapshot>(sink_.genesis());
    next_round_ = sink_.first_round();
  }
}

LiveRun::~LiveRun() {
  if (thread_.joinable()) {
    if (thread_.get_id() == std::this_thread::get_id()) {
      thread_.detach();
    } else {
      thread_.join();
    }
  }
}

std::size_t LiveRun::set_breakpoint(const Breakpoint& bp) {
  std::lock_guard lock(mu_);
  auto it = breakpoints_.find(bp);
  if (it != breakpoints_.end()) return it->second;
  const std::size_t id = breakpoints_.size() + 1;
  breakpoints_.emplace(bp, id);
  return id;
}

std::vector<std::pair<std::size_t, Breakpoint>> LiveRun::breakpoints() const {
  std::lock_guard lock(mu_);
  std::vector<std::pair<std::size_t, Breakpoint>> out;
  for (const auto& [bp, id] : breakpoints_) out.emplace_back(id, bp);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

SessionOptions LiveRun::session_options() {
  SessionOptions opts;
  opts.mode = SessionMode::kAttachedLive;
  opts.evaluator = evaluator_;
  opts.adopter = shared_from_this();
  opts.simulator = sim_;
  return opts;
}

std::shared_ptr<DebugSession> LiveRun::attach(DebugCursor at) { return open_session(store(), at, session_options()); }

void LiveRun::run() {
  {
    std::lock_guard lock(mu_);
    if (running_) fail(ErrorCode::kConflict, "live run: already started");
    running_ = true;
  }
  loop();
  std::lock_guard lock(mu_);
  if (error_) std::rethrow_exception(error_);
}

void LiveRun::start() {
  std::lock_guard lock(mu_);
  if (running_) fail(ErrorCode::kConflict, "live run: already started");
  running_ = true;
  thread_ = std::thread([this] { loop(); });
}

void LiveRun::loop() {
  const auto num_rounds = static_cast<RoundId>(sim_->config().num_rounds);
  try {
    for (;;) {
      telemetry::SnapshotPtr global;
      std::string base_ref;
      RoundId round = 0;
      std::set<ClientId> barred;
      std::uint64_t generation = 0;
      {
        std::lock_guard lock(mu_);
        if (next_round_ >= num_rounds) break;
        global = global_;
        base_ref = base_ref_;
        round = next_round_;
        barred = barred_;
        generation = generation_;
      }
      const auto participants = sim_->select_participants(round, barred);
      if (participants.empty()) fail(ErrorCode::kFailedPrecondition, "live run: every client is barred");
      telemetry::RoundRecord rec = sim_->run_round(*global, round, participants, base_ref);
      if (callbacks_.before_commit) callbacks_.before_commit(round);

      std::string timeline;
      {
        std::lock_guard lock(mu_);
        // A fix was adopted while this round trained on the old global.
        if (generation != generation_) continue;
        sink_.record_round(rec);
        timeline = sink_.timeline();
        global_ = rec.global_snapshot;
        base_ref_ = sink_.is_branch() ? telemetry::branch_ref(timeline, round) : telemetry::main_ref(round);
        next_round_ = round + 1;
      }
      if (callbacks_.on_commit) callbacks_.on_commit(rec, timeline);

      std::vector<Breakpoint> hits;
      {
        std::lock_guard lock(mu_);
        for (const auto& [bp, id] : breakpoints_) {
          if (bp.round_id != round) continue;
          if (bp.client_id &&
              std::find(rec.participant_ids.begin(), rec.participant_ids.end(), *bp.client_id) == rec.participant_ids.end())
            continue;
          hits.push_back(bp);
        }
      }
      for (const Breakpoint& bp : hits) {
        DebugCursor at = DebugCursor::round(round);
        if (bp.client_id) {
          const auto pos = std::find(rec.participant_ids.begin(), rec.participant_ids.end(), *bp.client_id) -
                           rec.participant_ids.begin();
          at = DebugCursor::client(round, static_cast<std::size_t>(pos) + 1);
        }
        auto session = open_session(store(), at, session_options());
        if (callbacks_.on_breakpoint) callbacks_.on_breakpoint(bp, std::move(session));
      }
    }
  } catch (...) {
    std::lock_guard lock(mu_);
    error_ = std::current_exception();
  }
  std::lock_guard lock(mu_);
  finished_ = true;
  done_cv_.notify_all();
}

void LiveRun::wait() {
  std::unique_lock lock(mu_);
  done_cv_.wait(lock, [&] { return finished_; });
  auto error = error_;
  lock.unlock();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  if (error) std::rethrow_exception(error);
}

bool LiveRun::finished() const {
  std::lock_guard lock(mu_);
  return finished_;
}

void LiveRun::adopt(const telemetry::TelemetryStore& branch, const std::set<ClientId>& barred) {
  const auto latest = branch.latest_round();
  require(latest.has_value(), "adopt: branch has no rounds");
  auto head = branch.load_round(*latest)->global_snapshot;
  {
    std::lock_guard lock(mu_);
    branch.set_head(branch.timeline());
    sink_ = branch;
    global_ = std::move(head);
    base_ref_ = telemetry::branch_ref(branch.timeline(), *latest);
    next_round_ = *latest + 1;
    barred_.insert(barred.begin(), barred.end());
    ++generation_;
  }
  if (callbacks_.on_adopt) callbacks_.on_adopt(branch.timeline());
}

telemetry::TelemetryStore LiveRun::store() const {
  std::lock_guard lock(mu_);
  return sink_;
}

std::set<ClientId> LiveRun::barred() const {
  std::lock_guard lock(mu_);
  return barred_;
}

}  // namespace fldebug::debugger
