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
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace fldebug::server {

enum class EventKind { kRoundCommitted, kBreakpointHit, kSessionState, kLocalizationResult, kFixApplied };

std::string to_string(EventKind kind);

struct ApiEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kRoundCommitted;
  nlohmann::json payload;

  nlohmann::json to_json() const;
};

/// Fan-out of API events. Sequence numbers are global and strictly
/// increasing; subscribers are invoked in publish order, under the bus lock,
/// so handlers must not publish or block.
class EventBus {
 public:
  using Handler = std::function<void(const ApiEvent&)>;

  explicit EventBus(std::size_t history_limit = 1024);

  ApiEvent publish(EventKind kind, nlohmann::json payload);
  std::uint64_t subscribe(Handler handler);
  /// Delivers retained events with seq > `after` first, then live ones.
  std::uint64_t subscribe_after(std::uint64_t after, Handler handler);
  void unsubscribe(std::uint64_t token);

  /// Most recent events, oldest first.
  std::vector<ApiEvent> history() const;
  std::uint64_t last_seq() const;

 private:
  mutable std::mutex mu_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t next_token_ = 1;
  std::map<std::uint64_t, Handler> handlers_;
  std::deque<ApiEvent> history_;
  std::size_t history_limit_;
};

}  // namespace fldebug::server
