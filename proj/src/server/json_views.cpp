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

#include "fldebug/server/json_views.hpp"

#include <numeric>

namespace fldebug::server {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorCode::kInvalidArgument, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kInvalidArgument, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key);
}

}  // namespace

json metrics_json(const ClientMetrics& m) {
  return {{"client_id", m.client_id},
          {"training_loss", m.training_loss},
          {"response_time", m.response_time},
          {"dataset_size", m.dataset_size},
          {"hyperparams",
           {{"learning_rate", m.hyperparams.learning_rate},
            {"epochs", m.hyperparams.epochs},
            {"batch_size", m.hyperparams.batch_size},
            {"weight_decay", m.hyperparams.weight_decay},
            {"seed", m.hyperparams.seed}}}};
}

json cursor_json(const debugger::DebugCursor& c) {
  json j = {{"round_index", c.round_index}, {"granularity", debugger::to_string(c.granularity)}};
  j["client_position"] = c.client_position ? json(*c.client_position) : json(nullptr);
  return j;
}

debugger::DebugCursor cursor_from_json(const json& j) {
  const auto round = field<RoundId>(j, "round_index");
  const std::string g = optional_field<std::string>(j, "granularity").value_or("ROUND");
  if (g == "ROUND") return debugger::DebugCursor::round(round);
  if (g == "CLIENT") return debugger::DebugCursor::client(round, optional_field<std::size_t>(j, "client_position").value_or(0));
  fail(ErrorCode::kInvalidArgument, "granularity must be ROUND or CLIENT");
}

json view_json(const debugger::StateView& v) {
  json metrics = json::array();
  for (const auto& m : v.metrics) metrics.push_back(metrics_json(m));
  json j = {{"cursor", cursor_json(v.cursor)},
            {"timeline", v.timeline},
            {"participants", v.participants},
            {"metrics", metrics},
            {"partial_global_digest", v.partial_digest}};
  j["test_accuracy"] = v.test_accuracy ? json(*v.test_accuracy) : json(nullptr);
  return j;
}

json step_json(const debugger::StepResult& r) {
  return {{"boundary", r.boundary}, {"notice", r.notice}, {"view", view_json(r.view)}};
}

json breakpoint_json(const debugger::Breakpoint& bp) {
  json j = {{"round_id", bp.round_id}};
  j["client_id"] = bp.client_id ? json(*bp.client_id) : json(nullptr);
  return j;
}

debugger::Breakpoint breakpoint_from_json(const json& j) {
  debugger::Breakpoint bp;
  const auto round = field<long long>(j, "round_id");
  require(round >= 0, "round_id must be non-negative");
  bp.round_id = static_cast<RoundId>(round);
  bp.client_id = optional_field<ClientId>(j, "client_id");
  return bp;
}

json round_summary_json(const telemetry::RoundRecord& rec) {
  double loss = 0.0;
  for (const auto& [id, m] : rec.client_metrics) loss += m.training_loss;
  json j = {{"round_id", rec.round_id},
            {"participants", rec.participant_ids},
            {"participant_count", rec.participant_ids.size()},
            {"global_digest", rec.global_snapshot->digest()},
            {"base_ref", rec.base_ref},
            {"aggregation_duration", rec.aggregation_duration}};
  j["mean_training_loss"] = rec.client_metrics.empty() ? json(nullptr) : json(loss / rec.client_metrics.size());
  return j;
}

json round_detail_json(const telemetry::RoundRecord& rec) {
  json clients = json::array();
  for (ClientId c : rec.participant_ids) {
    json m = metrics_json(rec.client_metrics.at(c));
    m["snapshot_digest"] = rec.client_snapshots.at(c)->digest();
    clients.push_back(std::move(m));
  }
  json j = round_summary_json(rec);
  j["weighting"] = telemetry::to_string(rec.weighting);
  j["clients"] = std::move(clients);
  return j;
}

json resume_json(const debugger::ResumeSummary& s) {
  return {{"from_round", s.from_round}, {"to_round", s.to_round}, {"rounds_replayed", s.rounds_replayed}};
}

json fix_json(const debugger::FixSummary& s) {
  json j = {{"branch", s.branch},
            {"mode", debugger::to_string(s.mode)},
            {"from_round", s.from_round},
            {"last_round", s.last_round},
            {"warnings", s.warnings},
            {"final_global_digest", s.final_digest},
            {"barred", s.barred},
            {"adopted", s.adopted}};
  j["original_accuracy"] = s.original_accuracy ? json(*s.original_accuracy) : json(nullptr);
  j["corrected_accuracy"] = s.corrected_accuracy ? json(*s.corrected_accuracy) : json(nullptr);
  return j;
}

debugger::FixRequest fix_request_from_json(const json& j) {
  debugger::FixRequest req;
  for (ClientId c : field<std::vector<ClientId>>(j, "faulty")) req.faulty.insert(c);
  const auto from = field<long long>(j, "from_round");
  require(from >= 0, "from_round must be non-negative");
  req.from_round = static_cast<RoundId>(from);
  if (auto mode = optional_field<std::string>(j, "mode")) req.mode = debugger::parse_fix_mode(*mode);
  if (auto bar = optional_field<bool>(j, "bar_faulty")) req.bar_faulty = *bar;
  if (auto name = optional_field<std::string>(j, "branch")) req.branch_name = *name;
  return req;
}

json report_json(const faultloc::FaultReport& r, const faultloc::TestSuite& suite) {
  json inputs = json::array();
  for (const auto& v : r.per_input) {
    const auto& entry = suite.entries.at(v.input_index);
    inputs.push_back({{"input_index", v.input_index},
                      {"input_seed", entry.seed},
                      {"label", entry.label},
                      {"agreeing", entry.agreeing},
                      {"accused", v.accused},
                      {"max_common_activations", v.max_common_activations},
                      {"tie", v.tie}});
  }
  json j = {{"verdict", r.verdict},
            {"per_input", inputs},
            {"forward_passes", r.forward_passes},
            {"seconds", r.seconds},
            {"suite_attempts", suite.attempts},
            {"suite_partial", suite.partial},
            {"suite_warning", suite.warning}};
  j["accuracy_vs_truth"] = r.accuracy_vs_truth ? json(*r.accuracy_vs_truth) : json(nullptr);
  return j;
}

json error_json(ErrorCode code, const std::string& message) {
  return {{"error", {{"code", to_string(code)}, {"message", message}}}};
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kFailedPrecondition: return 409;
    case ErrorCode::kIo:
    case ErrorCode::kDataLoss: return 500;
  }
  return 500;
}

}  // namespace fldebug::server
