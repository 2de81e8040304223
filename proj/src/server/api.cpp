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

#include "fldebug/server/api.hpp"

#include <charconv>
#include <vector>

#include "fldebug/error.hpp"
#include "fldebug/server/json_views.hpp"

namespace fldebug::server {

using nlohmann::json;

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const std::size_t j = path.find('/', i);
    const std::string part = path.substr(i, j == std::string::npos ? std::string::npos : j - i);
    if (!part.empty()) parts.push_back(part);
    if (j == std::string::npos) break;
    i = j;
  }
  return parts;
}

RoundId parse_round_id(const std::string& text) {
  RoundId v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::kInvalidArgument, "round id '" + text + "' is not a non-negative integer");
  return v;
}

ApiResponse method_not_allowed(const std::string& method, const std::string& path) {
  return {405, {{"error", {{"code", "method_not_allowed"}, {"message", method + " not allowed on " + path}}}}};
}

json session_json(Controller& c, const std::string& id) {
  const auto s = c.session(id);
  return {{"session_id", id},
          {"mode", debugger::to_string(s->mode())},
          {"closed", s->closed()},
          {"fixed", s->fixed()},
          {"state", view_json(s->view())}};
}

}  // namespace

ApiResponse ApiRouter::handle(const std::string& method, const std::string& target, const std::string& body) const {
  const std::string path = target.substr(0, target.find('?'));
  json parsed;
  if (!body.empty()) {
    try {
      parsed = json::parse(body);
    } catch (const json::parse_error& e) {
      return {400, error_json(ErrorCode::kInvalidArgument, std::string("malformed JSON body: ") + e.what())};
    }
  }
  try {
    return dispatch(method, path, parsed);
  } catch (const Error& e) {
    return {http_status(e.code()), error_json(e.code(), e.what())};
  } catch (const json::exception& e) {
    return {400, error_json(ErrorCode::kInvalidArgument, e.what())};
  } catch (const std::exception& e) {
    return {500, {{"error", {{"code", "internal"}, {"message", e.what()}}}}};
  }
}

ApiResponse ApiRouter::dispatch(const std::string& method, const std::string& path, const json& body) const {
  const auto parts = split_path(path);
  const bool get = method == "GET";
  const bool post = method == "POST";

  if (parts.size() == 1 && parts[0] == "rounds") {
    if (!get) return method_not_allowed(method, path);
    json rounds = json::array();
    for (const auto& rec : controller_.timeline_rounds()) rounds.push_back(round_summary_json(*rec));
    const auto store = controller_.head_store();
    return {200, {{"timeline", store.timeline()}, {"branches", store.branches()}, {"rounds", rounds}}};
  }
  if (parts.size() == 2 && parts[0] == "rounds") {
    if (!get) return method_not_allowed(method, path);
    return {200, round_detail_json(*controller_.round(parse_round_id(parts[1])))};
  }
  if (parts.size() == 1 && parts[0] == "breakpoints") {
    if (get) {
      json list = json::array();
      for (const auto& [id, bp] : controller_.breakpoints()) {
        json j = breakpoint_json(bp);
        j["id"] = id;
        list.push_back(j);
      }
      return {200, {{"breakpoints", list}}};
    }
    if (!post) return method_not_allowed(method, path);
    const auto bp = breakpoint_from_json(body);
    const std::size_t id = controller_.set_breakpoint(bp);
    json j = breakpoint_json(bp);
    j["id"] = id;
    return {201, j};
  }
  if (parts.size() == 1 && parts[0] == "run") {
    if (!post) return method_not_allowed(method, path);
    controller_.start_live();
    return {202, {{"started", true}}};
  }
  if (parts.size() == 1 && parts[0] == "sessions") {
    if (get) return {200, {{"sessions", controller_.session_ids()}}};
    if (!post) return method_not_allowed(method, path);
    const std::string id = controller_.open_session(cursor_from_json(body));
    return {201, session_json(controller_, id)};
  }
  if (parts.size() == 2 && parts[0] == "sessions") {
    if (!get) return method_not_allowed(method, path);
    return {200, session_json(controller_, parts[1])};
  }
  if (parts.size() == 3 && parts[0] == "sessions") {
    if (!post) return method_not_allowed(method, path);
    const std::string& id = parts[1];
    const std::string& op = parts[2];
    if (op == "step") {
      if (!body.is_object() || !body.contains("direction") || !body["direction"].is_string())
        fail(ErrorCode::kInvalidArgument, "step: body must be {\"direction\": \"next|back|in|out\"}");
      const auto r = controller_.step(id, parse_step_direction(body["direction"].get<std::string>()));
      json j = step_json(r);
      j["session_id"] = id;
      return {200, j};
    }
    if (op == "resume") {
      json j = resume_json(controller_.resume(id));
      j["session_id"] = id;
      return {200, j};
    }
    if (op == "localize") {
      const auto out = controller_.localize(id, localize_request_from_json(body));
      json j = report_json(out.report, out.suite);
      j["session_id"] = id;
      return {200, j};
    }
    if (op == "fix") {
      json j = fix_json(controller_.fix(id, fix_request_from_json(body)));
      j["session_id"] = id;
      return {200, j};
    }
  }
  return {404, error_json(ErrorCode::kNotFound, "no route for " + method + " " + path)};
}

}  // namespace fldebug::server
