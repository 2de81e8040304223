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

#include <string>

#include <json.hpp>

#include "fldebug/server/controller.hpp"

namespace fldebug::server {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Routes one HTTP request to the controller. Transport-free so that the
/// route table can be exercised without sockets.
///
///   GET  /rounds                      timeline summaries
///   GET  /rounds/{id}                 per-client metrics and digests
///   GET  /breakpoints
///   POST /breakpoints                 {"round_id", "client_id"?}
///   POST /run                         live: start training
///   GET  /sessions
///   POST /sessions                    {"round_index", "granularity"?, "client_position"?}
///   GET  /sessions/{id}
///   POST /sessions/{id}/step          {"direction": "next"|"back"|"in"|"out"}
///   POST /sessions/{id}/resume
///   POST /sessions/{id}/localize      {"threshold"?, "kappa"?, "eta"?, "seed"?}
///   POST /sessions/{id}/fix           {"faulty", "from_round", "mode"?, "bar_faulty"?, "branch"?}
///
/// Errors: {"error": {"code", "message"}} with 400, 404, 405 or 409.
class ApiRouter {
 public:
  explicit ApiRouter(Controller& controller) : controller_(controller) {}

  ApiResponse handle(const std::string& method, const std::string& target, const std::string& body) const;

 private:
  ApiResponse dispatch(const std::string& method, const std::string& path, const nlohmann::json& body) const;

  Controller& controller_;
};

}  // namespace fldebug::server
