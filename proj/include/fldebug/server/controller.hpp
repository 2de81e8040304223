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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fldebug/debugger/live.hpp"
#include "fldebug/debugger/session.hpp"
#include "fldebug/faultloc/localization.hpp"
#include "fldebug/server/events.hpp"

namespace fldebug::server {

struct LocalizeRequest {
  float threshold = model::kDefaultActivationThreshold;
  std::size_t kappa = 10;
  std::optional<std::size_t> eta;
  std::uint64_t seed = 0;
  std::size_t max_attempts = 50000;
};

LocalizeRequest localize_request_from_json(const nlohmann::json& j);

struct LocalizeOutcome {
  faultloc::TestSuite suite;
  faultloc::FaultReport report;
};

enum class StepDirection { kNext, kBack, kIn, kOut };

StepDirection parse_step_direction(const std::string& text);

struct ControllerOptions {
  /// Given: live mode, rounds are trained and committed by a LiveRun.
  /// Absent: the store is replayed as recorded, and the simulator is
  /// rebuilt from the store's session metadata when possible (for RETRAIN
  /// and test accuracy).
  std::shared_ptr<const fl::Simulator> simulator;
  bool live = false;
  bool evaluate_accuracy = true;
};

/// Session coordinator behind the REPL and the HTTP API. Every mutation
/// goes through here; each operation publishes its ApiEvent.
class Controller {
 public:
  Controller(telemetry::TelemetryStore store, ControllerOptions options = {});
  ~Controller();

  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;

  EventBus& events() { return bus_; }
  bool live() const { return live_ != nullptr; }
  telemetry::TelemetryStore head_store() const;

  /// Committed rounds of the adopted timeline, including the parent rounds
  /// a branch was cut from.
  std::vector<std::shared_ptr<const telemetry::RoundRecord>> timeline_rounds() const;
  std::shared_ptr<const telemetry::RoundRecord> round(RoundId id) const;

  std::size_t set_breakpoint(const debugger::Breakpoint& bp);
  std::vector<std::pair<std::size_t, debugger::Breakpoint>> breakpoints() const;

  /// Live: starts (or continues) the run and blocks until a breakpoint
  /// fires or the run ends. Detached: replays committed rounds to the next
  /// breakpoint. Returns the session opened at the hit, if any.
  std::optional<std::string> run_until_break();
  /// Starts the live run without waiting.
  void start_live();
  void wait_live();

  std::string open_session(const debugger::DebugCursor& at);
  std::shared_ptr<debugger::DebugSession> session(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  debugger::StepResult step(const std::string& id, StepDirection dir);
  debugger::ResumeSummary resume(const std::string& id);
  LocalizeOutcome localize(const std::string& id, const LocalizeRequest& req);
  debugger::FixSummary fix(const std::string& id, const debugger::FixRequest& req);

 private:
  std::string register_session(std::shared_ptr<debugger::DebugSession> s);
  void publish_state(const std::string& id, const debugger::StateView& view, const std::string& event);
  debugger::SessionOptions detached_options() const;

  ControllerOptions options_;
  std::shared_ptr<const fl::Simulator> sim_;
  debugger::Evaluator evaluator_;
  telemetry::TelemetryStore store_;
  EventBus bus_;
  std::shared_ptr<debugger::LiveRun> live_;

  mutable std::mutex mu_;
  std::condition_variable hit_cv_;
  std::map<std::string, std::shared_ptr<debugger::DebugSession>> sessions_;
  std::size_t next_session_ = 1;
  std::map<debugger::Breakpoint, std::size_t> breakpoints_;  // detached mode
  std::optional<RoundId> replayed_through_;                 // detached mode
  std::vector<std::string> pending_hits_;
  bool live_started_ = false;
};

}  // namespace fldebug::server
