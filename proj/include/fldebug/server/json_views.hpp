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

#include <json.hpp>

#include "fldebug/debugger/session.hpp"
#include "fldebug/error.hpp"
#include "fldebug/faultloc/localization.hpp"
#include "fldebug/telemetry/record.hpp"

// Wire shapes of the HTTP/WebSocket API. Model weights never appear;
// snapshots are identified by their SHA-256 digest.
namespace fldebug::server {

nlohmann::json metrics_json(const ClientMetrics& m);
nlohmann::json cursor_json(const debugger::DebugCursor& c);
debugger::DebugCursor cursor_from_json(const nlohmann::json& j);
nlohmann::json view_json(const debugger::StateView& v);
nlohmann::json step_json(const debugger::StepResult& r);
nlohmann::json breakpoint_json(const debugger::Breakpoint& bp);
debugger::Breakpoint breakpoint_from_json(const nlohmann::json& j);
nlohmann::json round_summary_json(const telemetry::RoundRecord& rec);
nlohmann::json round_detail_json(const telemetry::RoundRecord& rec);
nlohmann::json resume_json(const debugger::ResumeSummary& s);
nlohmann::json fix_json(const debugger::FixSummary& s);
debugger::FixRequest fix_request_from_json(const nlohmann::json& j);
nlohmann::json report_json(const faultloc::FaultReport& r, const faultloc::TestSuite& suite);
nlohmann::json error_json(ErrorCode code, const std::string& message);

/// HTTP status for an error code.
int http_status(ErrorCode code);

}  // namespace fldebug::server
