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

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fldebug/debugger/session.hpp"

namespace fldebug::debugger {

struct LiveCallbacks {
  /// After each commit, on the training thread.
  std::function<void(const telemetry::RoundRecord&, const std::string& timeline)> on_commit;
  /// A breakpoint matched a committed round; the session is already open.
  std::function<void(const Breakpoint&, std::shared_ptr<DebugSession>)> on_breakpoint;
  std::function<void(const std::string& branch)> on_adopt;
  /// Before each commit; tests use it to hold the run mid-round.
  std::function<void(RoundId)> before_commit;
};

/// Drives a simulated federation round by round, committing to the store
/// head. Debug sessions only read what it commits; the single write path
/// besides commits is adopt(), which swaps the current global and round
/// sink for a corrected branch between rounds.
class LiveRun final : public TimelineAdopter, public std::enable_shared_from_this<LiveRun> {
 public:
  static std::shared_ptr<LiveRun> create(std::shared_ptr<const fl::Simulator> sim, telemetry::TelemetryStore store,
                                         LiveCallbacks callbacks = {}, Evaluator evaluator = {});
  ~LiveRun() override;

  LiveRun(const LiveRun&) = delete;
  LiveRun& operator=(const LiveRun&) = delete;

  /// Returns the breakpoint's id; registering the same breakpoint twice
  /// returns the first id.
  std::size_t set_breakpoint(const Breakpoint& bp);
  std::vector<std::pair<std::size_t, Breakpoint>> breakpoints() const;

  /// Runs every remaining round on the calling thread.
  void run();
  /// Runs on a background thread.
  void start();
  /// Waits for the background run; rethrows its error.
  void wait();
  bool finished() const;

  /// Opens an ATTACHED_LIVE session whose fixes are adopted by this run.
  std::shared_ptr<DebugSession> attach(DebugCursor at);

  void adopt(const telemetry::TelemetryStore& branch, const std::set<ClientId>& barred) override;

  telemetry::TelemetryStore store() const;
  std::set<ClientId> barred() const;
  const fl::Simulator& simulator() const { return *sim_; }
  const Evaluator& evaluator() const { return evaluator_; }

 private:
  LiveRun(std::shared_ptr<const fl::Simulator> sim, telemetry::TelemetryStore store, LiveCallbacks callbacks,
          Evaluator evaluator);
  SessionOptions session_options();
  void loop();

  std::shared_ptr<const fl::Simulator> sim_;
  LiveCallbacks callbacks_;
  Evaluator evaluator_;

  mutable std::mutex mu_;
  std::condition_variable done_cv_;
  telemetry::TelemetryStore sink_;
  telemetry::SnapshotPtr global_;
  std::string base_ref_ = "genesis";
  RoundId next_round_ = 0;
  std::set<ClientId> barred_;
  std::uint64_t generation_ = 0;
  std::map<Breakpoint, std::size_t> breakpoints_;
  bool running_ = false;
  bool finished_ = false;
  std::exception_ptr error_;
  std::thread thread_;
};

}  // namespace fldebug::debugger
