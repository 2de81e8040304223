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

#include "fldebug/server/controller.hpp"

#include <algorithm>

#include "fldebug/error.hpp"
#include "fldebug/server/json_views.hpp"

namespace fldebug::server {

using nlohmann::json;

LocalizeRequest localize_request_from_json(const json& j) {
  LocalizeRequest req;
  if (j.is_null()) return req;
  require(j.is_object(), "localize: body must be an object");
  try {
    if (j.contains("threshold") && !j["threshold"].is_null()) req.threshold = j["threshold"].get<float>();
    if (j.contains("kappa") && !j["kappa"].is_null()) req.kappa = j["kappa"].get<std::size_t>();
    if (j.contains("eta") && !j["eta"].is_null()) req.eta = j["eta"].get<std::size_t>();
    if (j.contains("seed") && !j["seed"].is_null()) req.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("max_attempts") && !j["max_attempts"].is_null()) req.max_attempts = j["max_attempts"].get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("localize: ") + e.what());
  }
  return req;
}

StepDirection parse_step_direction(const std::string& text) {
  if (text == "next") return StepDirection::kNext;
  if (text == "back") return StepDirection::kBack;
  if (text == "in") return StepDirection::kIn;
  if (text == "out") return StepDirection::kOut;
  fail(ErrorCode::kInvalidArgument, "step direction must be one of next, back, in, out");
}

Controller::Controller(telemetry::TelemetryStore store, ControllerOptions options)
    : options_(std::move(options)), sim_(options_.simulator), store_(std::move(store)) {
  if (const std::string head = store_.head(); head != store_.timeline()) store_ = store_.open_branch(head);
  if (!sim_) {
    try {
      sim_ = std::make_shared<const fl::Simulator>(fl::parse_session_config(store_.metadata_yaml()));
      if (!(sim_->config().arch == store_.arch())) sim_.reset();
    } catch (const std::exception&) {
      sim_.reset();
    }
  }
  if (sim_ && options_.evaluate_accuracy) {
    auto sim = sim_;
    evaluator_ = [sim](const model::ModelSnapshot& m) { return fl::evaluate(m, sim->test_set()); };
  }
  if (options_.live) {
    require(sim_ != nullptr, "controller: live mode needs a simulator");
    debugger::LiveCallbacks cb;
    cb.on_commit = [this](const telemetry::RoundRecord& rec, const std::string& timeline) {
      json payload = round_summary_json(rec);
      payload["timeline"] = timeline;
      bus_.publish(EventKind::kRoundCommitted, std::move(payload));
    };
    cb.on_breakpoint = [this](const debugger::Breakpoint& bp, std::shared_ptr<debugger::DebugSession> s) {
      const auto view = s->view();
      const std::string id = register_session(std::move(s));
      bus_.publish(EventKind::kBreakpointHit,
                   {{"session_id", id}, {"breakpoint", breakpoint_json(bp)}, {"state", view_json(view)}});
      std::lock_guard lock(mu_);
      pending_hits_.push_back(id);
      hit_cv_.notify_all();
    };
    cb.on_adopt = [this](const std::string&) {
      std::lock_guard lock(mu_);
      store_ = live_->store();
    };
    live_ = debugger::LiveRun::create(sim_, store_, std::move(cb), evaluator_);
  }
}

Controller::~Controller() {
  if (live_ && live_started_) {
    try {
      live_->wait();
    } catch (...) {
    }
  }
}

telemetry::TelemetryStore Controller::head_store() const {
  std::lock_guard lock(mu_);
  return store_;
}

std::vector<std::shared_ptr<const telemetry::RoundRecord>> Controller::timeline_rounds() const {
  const telemetry::TelemetryStore head = head_store();
  std::vector<std::shared_ptr<const telemetry::RoundRecord>> out;
  // Walk back through the branch points, then emit oldest first.
  std::vector<std::pair<telemetry::TelemetryStore, RoundId>> chain;  // (timeline, last round to include)
  telemetry::TelemetryStore current = head;
  std::optional<RoundId> limit = current.latest_round();
  for (;;) {
    if (limit) chain.emplace_back(current, *limit);
    if (!current.is_branch() || !current.has_round(current.first_round())) break;
    const std::string base = current.load_round(current.first_round())->base_ref;
    if (current.first_round() == 0 || base == "genesis") break;
    if (base.rfind("main:", 0) == 0) {
      current = current.main();
    } else {
      const auto colon = base.rfind(':');
      current = current.open_branch(base.substr(7, colon - 7));
    }
    limit = std::stoull(base.substr(base.rfind(':') + 1));
  }
  std::reverse(chain.begin(), chain.end());
  RoundId next = 0;
  for (const auto& [tl, last] : chain) {
    for (RoundId r = std::max(next, tl.first_round()); r <= last; ++r) out.push_back(tl.load_round(r));
    next = last + 1;
  }
  return out;
}

std::shared_ptr<const telemetry::RoundRecord> Controller::round(RoundId id) const {
  for (auto& rec : timeline_rounds())
    if (rec->round_id == id) return rec;
  fail(ErrorCode::kNotFound, "round " + std::to_string(id) + " is not committed");
}

std::size_t Controller::set_breakpoint(const debugger::Breakpoint& bp) {
  if (live_) return live_->set_breakpoint(bp);
  std::lock_guard lock(mu_);
  auto it = breakpoints_.find(bp);
  if (it != breakpoints_.end()) return it->second;
  const std::size_t id = breakpoints_.size() + 1;
  breakpoints_.emplace(bp, id);
  return id;
}

std::vector<std::pair<std::size_t, debugger::Breakpoint>> Controller::breakpoints() const {
  if (live_) return live_->breakpoints();
  std::lock_guard lock(mu_);
  std::vector<std::pair<std::size_t, debugger::Breakpoint>> out;
  for (const auto& [bp, id] : breakpoints_) out.emplace_back(id, bp);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void Controller::start_live() {
  require(live_ != nullptr, "run: not attached to a live run");
  std::lock_guard lock(mu_);
  if (live_started_) return;
  live_started_ = true;
  live_->start();
}

void Controller::wait_live() {
  if (!live_) return;
  start_live();
  live_->wait();
}

std::optional<std::string> Controller::run_until_break() {
  if (live_) {
    start_live();
    std::unique_lock lock(mu_);
    while (pending_hits_.empty()) {
      if (live_->finished()) break;
      hit_cv_.wait_for(lock, std::chrono::milliseconds(20));
    }
    if (pending_hits_.empty()) {
      lock.unlock();
      live_->wait();
      return std::nullopt;
    }
    std::string id = pending_hits_.front();
    pending_hits_.erase(pending_hits_.begin());
    return id;
  }

  const telemetry::TelemetryStore store = head_store();
  std::map<debugger::Breakpoint, std::size_t> bps;
  RoundId start = 0;
  {
    std::lock_guard lock(mu_);
    bps = breakpoints_;
    start = replayed_through_ ? *replayed_through_ + 1 : store.first_round();
  }
  for (RoundId r = start; store.has_round(r); ++r) {
    const auto rec = store.load_round(r);
    {
      std::lock_guard lock(mu_);
      replayed_through_ = r;
    }
    for (const auto& [bp, id] : bps) {
      if (bp.round_id != r) continue;
      auto at = debugger::DebugCursor::round(r);
      if (bp.client_id) {
        auto pos = std::find(rec->participant_ids.begin(), rec->participant_ids.end(), *bp.client_id);
        if (pos == rec->participant_ids.end()) continue;
        at = debugger::DebugCursor::client(r, static_cast<std::size_t>(pos - rec->participant_ids.begin()) + 1);
      }
      auto s = debugger::open_session(store, at, detached_options());
      const auto view = s->view();
      const std::string sid = register_session(std::move(s));
      bus_.publish(EventKind::kBreakpointHit, {{"session_id", sid}, {"breakpoint", breakpoint_json(bp)}, {"state", view_json(view)}});
      return sid;
    }
  }
  return std::nullopt;
}

debugger::SessionOptions Controller::detached_options() const {
  debugger::SessionOptions opts;
  opts.mode = debugger::SessionMode::kDetached;
  opts.evaluator = evaluator_;
  opts.simulator = sim_;
  return opts;
}

std::string Controller::register_session(std::shared_ptr<debugger::DebugSession> s) {
  std::lock_guard lock(mu_);
  std::string id = "s" + std::to_string(next_session_++);
  sessions_.emplace(id, std::move(s));
  return id;
}

void Controller::publish_state(const std::string& id, const debugger::StateView& view, const std::string& event) {
  const auto s = session(id);
  bus_.publish(EventKind::kSessionState, {{"session_id", id},
                                          {"event", event},
                                          {"closed", s->closed()},
                                          {"fixed", s->fixed()},
                                          {"mode", debugger::to_string(s->mode())},
                                          {"state", view_json(view)}});
}

std::string Controller::open_session(const debugger::DebugCursor& at) {
  at.validate();
  std::shared_ptr<debugger::DebugSession> s =
      live_ ? live_->attach(at) : debugger::open_session(head_store(), at, detached_options());
  const auto view = s->view();
  const std::string id = register_session(std::move(s));
  publish_state(id, view, "opened");
  return id;
}

std::shared_ptr<debugger::DebugSession> Controller::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorCode::kNotFound, "no session '" + id + "'");
  return it->second;
}

std::vector<std::string> Controller::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

debugger::StepResult Controller::step(const std::string& id, StepDirection dir) {
  const auto s = session(id);
  debugger::StepResult r;
  switch (dir) {
    case StepDirection::kNext: r = s->step_next(); break;
    case StepDirection::kBack: r = s->step_back(); break;
    case StepDirection::kIn: r = s->step_in(); break;
    case StepDirection::kOut: r = s->step_out(); break;
  }
  publish_state(id, r.view, r.boundary ? "boundary" : "step");
  return r;
}

debugger::ResumeSummary Controller::resume(const std::string& id) {
  const auto s = session(id);
  const auto summary = s->resume();
  bus_.publish(EventKind::kSessionState, {{"session_id", id},
                                          {"event", "resumed"},
                                          {"closed", true},
                                          {"fixed", false},
                                          {"mode", debugger::to_string(s->mode())},
                                          {"resume", resume_json(summary)}});
  return summary;
}

LocalizeOutcome Controller::localize(const std::string& id, const LocalizeRequest& req) {
  const auto s = session(id);
  if (s->closed()) fail(ErrorCode::kConflict, "localize: session is closed");
  const auto cursor = s->cursor();
  const auto rec = s->store().load_round(cursor.round_index);
  const auto clients = faultloc::clients_of(*rec);
  faultloc::SelectionConfig sel;
  sel.kappa = req.kappa;
  sel.eta = req.eta;
  sel.seed = req.seed;
  sel.max_attempts = req.max_attempts;
  faultloc::LocalizationConfig lc;
  lc.activation_threshold = req.threshold;
  LocalizeOutcome out;
  out.suite = faultloc::select_test_inputs(clients, sel);
  out.report = faultloc::localize(clients, out.suite, lc);
  json payload = report_json(out.report, out.suite);
  payload["session_id"] = id;
  payload["round_id"] = cursor.round_index;
  bus_.publish(EventKind::kLocalizationResult, std::move(payload));
  return out;
}

debugger::FixSummary Controller::fix(const std::string& id, const debugger::FixRequest& req) {
  const auto s = session(id);
  const auto summary = s->fix_and_replay(req);
  if (!live_) {
    std::lock_guard lock(mu_);
    store_ = store_.open_branch(summary.branch);
    replayed_through_.reset();
  }
  json payload = fix_json(summary);
  payload["session_id"] = id;
  bus_.publish(EventKind::kFixApplied, std::move(payload));
  publish_state(id, s->view(), "fixed");
  return summary;
}

}  // namespace fldebug::server
