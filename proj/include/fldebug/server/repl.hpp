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

#include <iosfwd>
#include <optional>
#include <string>

#include "fldebug/server/controller.hpp"

namespace fldebug::server {

/// Line-oriented debugger shell over a Controller. Every output line starts
/// with a fixed keyword so scripts can parse it.
class Repl {
 public:
  Repl(Controller& controller, std::ostream& out) : controller_(controller), out_(out) {}

  /// Executes one command line; false after `quit`.
  bool execute(const std::string& line);
  /// Reads commands until end of input or `quit`.
  void run(std::istream& in, bool prompt = false);

  const std::optional<std::string>& current_session() const { return current_; }

 private:
  void print_view(const debugger::StateView& v);
  void print_help();
  const std::string& require_session() const;

  Controller& controller_;
  std::ostream& out_;
  std::optional<std::string> current_;
};

}  // namespace fldebug::server
