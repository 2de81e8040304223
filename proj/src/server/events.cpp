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

#include "fldebug/server/events.hpp"

namespace fldebug::server {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kRoundCommitted: return "ROUND_COMMITTED";
    case EventKind::kBreakpointHit: return "BREAKPOINT_HIT";
    case EventKind::kSessionState: return "SESSION_STATE";
    case EventKind::kLocalizationResult: return "LOCALIZATION_RESULT";
    case EventKind::kFixApplied: return "FIX_APPLIED";
  }
  return "UNKNOWN";
}

nlohmann::json ApiEvent::to_json() const {
  return {{"seq", seq}, {"kind", server::to_string(kind)}, {"payload", payload}};
}

EventBus::EventBus(std::size_t history_limit) : history_limit_(history_limit) {}

ApiEvent EventBus::publish(EventKind kind, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  ApiEvent event{next_seq_++, kind, std::move(payload)};
  for (const auto& [token, handler] : handlers_) handler(event);
  history_.push_back(event);
  while (history_.size() > history_limit_) history_.pop_front();
  return event;
}

std::uint64_t EventBus::subscribe(Handler handler) {
  std::lock_guard lock(mu_);
  const std::uint64_t token = next_token_++;
  handlers_.emplace(token, std::move(handler));
  return token;
}

std::uint64_t EventBus::subscribe_after(std::uint64_t after, Handler handler) {
  std::lock_guard lock(mu_);
  for (const ApiEvent& e : history_)
    if (e.seq > after) handler(e);
  const std::uint64_t token = next_token_++;
  handlers_.emplace(token, std::move(handler));
  return token;
}

void EventBus::unsubscribe(std::uint64_t token) {
  std::lock_guard lock(mu_);
  handlers_.erase(token);
}

std::vector<ApiEvent> EventBus::history() const {
  std::lock_guard lock(mu_);
  return {history_.begin(), history_.end()};
}

std::uint64_t EventBus::last_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_ - 1;
}

}  // namespace fldebug::server
