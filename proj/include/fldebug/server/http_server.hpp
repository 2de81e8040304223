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

#include <cstdint>
#include <memory>
#include <string>

#include "fldebug/server/api.hpp"

namespace fldebug::server {

/// HTTP + WebSocket front end. Requests are routed through ApiRouter on a
/// worker pool; a WebSocket upgrade on /events streams ApiEvents as JSON
/// text frames ({"seq", "kind", "payload"}). `/events?after=N` first
/// replays retained events with seq > N.
class HttpServer {
 public:
  HttpServer(Controller& controller, std::string address = "127.0.0.1", std::uint16_t port = 0,
             std::size_t io_threads = 2);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal.
  void wait();
  std::uint16_t port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fldebug::server
