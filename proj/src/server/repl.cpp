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

#include "fldebug/server/repl.hpp"

#include <charconv>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "fldebug/error.hpp"
#include "fldebug/io.hpp"

namespace fldebug::server {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::kInvalidArgument, std::string(what) + " must be a non-negative integer, got '" + text + "'");
  return v;
}

std::set<ClientId> parse_ids(const std::string& text) {
  std::set<ClientId> out;
  std::size_t i = 0;
  while (i <= text.size()) {
    const std::size_t j = std::min(text.find(',', i), text.size());
    if (j > i) out.insert(static_cast<ClientId>(parse_u64(text.substr(i, j - i), "client id")));
    i = j + 1;
  }
  return out;
}

// "--name value" pairs after the positional arguments.
std::map<std::string, std::string> parse_flags(const std::vector<std::string>& args, std::size_t from,
                                               std::vector<std::string>* positional) {
  std::map<std::string, std::string> flags;
  for (std::size_t i = from; i < args.size(); ++i) {
    if (args[i].rfind("--", 0) == 0) {
      const std::string name = args[i].substr(2);
      if (name == "no-bar") {
        flags[name] = "1";
      } else {
        if (i + 1 >= args.size()) fail(ErrorCode::kInvalidArgument, "flag --" + name + " needs a value");
        flags[name] = args[++i];
      }
    } else if (positional) {
      positional->push_back(args[i]);
    } else {
      fail(ErrorCode::kInvalidArgument, "unexpected argument '" + args[i] + "'");
    }
  }
  return flags;
}

}  // namespace

const std::string& Repl::require_session() const {
  if (!current_) fail(ErrorCode::kFailedPrecondition, "no active session; use 'run', 'open' or 'use'");
  return *current_;
}

void Repl::print_help() {
  out_ << "help commands:\n"
       << "help   break <round> [client]      set a breakpoint\n"
       << "help   run                         run (or replay) to the next breakpoint\n"
       << "help   open <round> [position]     open a session at a round (or a client position)\n"
       << "help   use <session>               switch the active session\n"
       << "help   next | back                 step forward / backward\n"
       << "help   stepin | stepout            switch to client / round granularity\n"
       << "help   inspect                     print the current state view\n"
       << "help   resume                      replay to the latest round and close the session\n"
       << "help   localize [--threshold T] [--kappa K] [--eta E] [--seed S]\n"
       << "help   fix <ids> --from <round> [--mode reaggregate|retrain] [--no-bar] [--branch NAME]\n"
       << "help   rounds                      list committed rounds\n"
       << "help   quit\n";
}

void Repl::print_view(const debugger::StateView& v) {
  out_ << "cursor " << v.cursor.to_string() << " timeline " << v.timeline << " participants " << v.participants.size()
       << "\n";
  out_ << "partial_global " << v.partial_digest;
  if (v.test_accuracy) out_ << " test_accuracy " << io::format_exact(*v.test_accuracy);
  out_ << "\n";
}

bool Repl::execute(const std::string& line) {
  const auto args = tokenize(line);
  if (args.empty()) return true;
  const std::string& cmd = args[0];
  try {
    if (cmd == "quit" || cmd == "exit") {
      out_ << "bye\n";
      return false;
    }
    if (cmd == "help") {
      print_help();
    } else if (cmd == "break") {
      if (args.size() < 2 || args.size() > 3) fail(ErrorCode::kInvalidArgument, "usage: break <round> [client]");
      debugger::Breakpoint bp;
      bp.round_id = parse_u64(args[1], "round");
      if (args.size() == 3) bp.client_id = static_cast<ClientId>(parse_u64(args[2], "client"));
      const std::size_t id = controller_.set_breakpoint(bp);
      out_ << "breakpoint " << id << " " << bp.to_string() << "\n";
    } else if (cmd == "run") {
      const auto hit = controller_.run_until_break();
      if (!hit) {
        out_ << "finished no breakpoint hit\n";
      } else {
        current_ = *hit;
        out_ << "hit session " << *hit << "\n";
        print_view(controller_.session(*hit)->view());
      }
    } else if (cmd == "open") {
      if (args.size() < 2 || args.size() > 3) fail(ErrorCode::kInvalidArgument, "usage: open <round> [position]");
      const RoundId r = parse_u64(args[1], "round");
      const auto at = args.size() == 3 ? debugger::DebugCursor::client(r, parse_u64(args[2], "position"))
                                       : debugger::DebugCursor::round(r);
      current_ = controller_.open_session(at);
      out_ << "session " << *current_ << "\n";
      print_view(controller_.session(*current_)->view());
    } else if (cmd == "use") {
      if (args.size() != 2) fail(ErrorCode::kInvalidArgument, "usage: use <session>");
      controller_.session(args[1]);
      current_ = args[1];
      out_ << "session " << *current_ << "\n";
    } else if (cmd == "next" || cmd == "back" || cmd == "stepin" || cmd == "stepout") {
      const StepDirection dir = cmd == "next"   ? StepDirection::kNext
                                : cmd == "back" ? StepDirection::kBack
                                : cmd == "stepin" ? StepDirection::kIn
                                                  : StepDirection::kOut;
      const auto r = controller_.step(require_session(), dir);
      if (r.boundary) out_ << "boundary " << r.notice << "\n";
      else if (!r.notice.empty()) out_ << "notice " << r.notice << "\n";
      print_view(r.view);
    } else if (cmd == "inspect") {
      const auto v = controller_.session(require_session())->view();
      print_view(v);
      const std::size_t folded = v.cursor.client_position.value_or(v.participants.size());
      out_ << "metrics client training_loss response_time dataset_size aggregated\n";
      for (std::size_t i = 0; i < v.metrics.size(); ++i) {
        const auto& m = v.metrics[i];
        out_ << "metrics " << m.client_id << " " << io::format_exact(m.training_loss) << " "
             << io::format_exact(m.response_time) << " " << m.dataset_size << " " << (i < folded ? "yes" : "no") << "\n";
      }
    } else if (cmd == "resume") {
      const auto s = controller_.resume(require_session());
      out_ << "resumed rounds " << s.from_round << ".." << s.to_round << " replayed " << s.rounds_replayed
           << " session closed\n";
    } else if (cmd == "localize") {
      const auto flags = parse_flags(args, 1, nullptr);
      LocalizeRequest req;
      for (const auto& [k, v] : flags) {
        if (k == "threshold") req.threshold = io::parse_float(v);
        else if (k == "kappa") req.kappa = parse_u64(v, "kappa");
        else if (k == "eta") req.eta = parse_u64(v, "eta");
        else if (k == "seed") req.seed = parse_u64(v, "seed");
        else fail(ErrorCode::kInvalidArgument, "localize: unknown flag --" + k);
      }
      const auto out = controller_.localize(require_session(), req);
      if (out.suite.partial) out_ << "warning " << out.suite.warning << "\n";
      for (const auto& v : out.report.per_input) {
        out_ << "input " << v.input_index << " label " << out.suite.entries[v.input_index].label << " accused "
             << v.accused << " common " << v.max_common_activations << (v.tie ? " tie" : "") << "\n";
      }
      out_ << "verdict " << out.report.verdict << " inputs " << out.report.per_input.size() << " forward_passes "
           << out.report.forward_passes << "\n";
    } else if (cmd == "fix") {
      std::vector<std::string> positional;
      const auto flags = parse_flags(args, 1, &positional);
      if (positional.size() != 1 || !flags.count("from"))
        fail(ErrorCode::kInvalidArgument, "usage: fix <ids> --from <round> [--mode reaggregate|retrain] [--no-bar]");
      debugger::FixRequest req;
      req.faulty = parse_ids(positional[0]);
      req.from_round = parse_u64(flags.at("from"), "from");
      for (const auto& [k, v] : flags) {
        if (k == "from") continue;
        if (k == "mode") req.mode = debugger::parse_fix_mode(v);
        else if (k == "no-bar") req.bar_faulty = false;
        else if (k == "branch") req.branch_name = v;
        else fail(ErrorCode::kInvalidArgument, "fix: unknown flag --" + k);
      }
      const auto s = controller_.fix(require_session(), req);
      for (const auto& w : s.warnings) out_ << "warning " << w << "\n";
      out_ << "fixed branch " << s.branch << " mode " << debugger::to_string(s.mode) << " rounds " << s.from_round
           << ".." << s.last_round << " final_global " << s.final_digest << "\n";
      if (s.original_accuracy && s.corrected_accuracy)
        out_ << "accuracy original " << io::format_exact(*s.original_accuracy) << " corrected "
             << io::format_exact(*s.corrected_accuracy) << "\n";
    } else if (cmd == "rounds") {
      for (const auto& rec : controller_.timeline_rounds())
        out_ << "round " << rec->round_id << " participants " << rec->participant_ids.size() << " global "
             << rec->global_snapshot->digest() << " base " << rec->base_ref << "\n";
    } else {
      out_ << "error unknown command '" << cmd << "'\n";
      print_help();
    }
  } catch (const Error& e) {
    out_ << "error " << to_string(e.code()) << ": " << e.what() << "\n";
  }
  out_.flush();
  return true;
}

void Repl::run(std::istream& in, bool prompt) {
  std::string line;
  for (;;) {
    if (prompt) out_ << "(fldebug) " << std::flush;
    if (!std::getline(in, line)) break;
    if (!execute(line)) break;
  }
}

}  // namespace fldebug::server
