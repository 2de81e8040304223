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

#include "fldebug/server/http_server.hpp"

#include <atomic>
#include <charconv>
#include <deque>
#include <thread>
#include <vector>

#include <boost/asio/bind_executor.hpp>
#include <boost/asio/dispatch.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "fldebug/error.hpp"

namespace fldebug::server {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class EventSocket : public std::enable_shared_from_this<EventSocket> {
 public:
  EventSocket(tcp::socket&& socket, EventBus& bus) : ws_(std::move(socket)), bus_(bus) {}

  ~EventSocket() {
    if (token_) bus_.unsubscribe(token_);
  }

  void run(http::request<http::string_body> req, std::uint64_t after) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(req, beast::bind_front_handler(&EventSocket::on_accept, shared_from_this(), after));
  }

 private:
  void on_accept(std::uint64_t after, beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<EventSocket> weak = shared_from_this();
    token_ = bus_.subscribe_after(after, [weak](const ApiEvent& e) {
      if (auto self = weak.lock()) {
        asio::post(self->ws_.get_executor(), [self, text = e.to_json().dump()]() mutable { self->enqueue(std::move(text)); });
      }
    });
    do_read();
  }

  // Reads only to observe close frames and disconnects.
  void do_read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        if (self->token_) self->bus_.unsubscribe(std::exchange(self->token_, 0));
        return;
      }
      self->in_.consume(self->in_.size());
      self->do_read();
    });
  }

  void enqueue(std::string text) {
    if (closed_) return;
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->queue_.clear();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->do_write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  EventBus& bus_;
  beast::flat_buffer in_;
  std::deque<std::string> queue_;
  std::uint64_t token_ = 0;
  bool closed_ = false;
};

std::uint64_t query_after(const std::string& target) {
  const auto q = target.find("after=");
  if (q == std::string::npos) return 0;
  std::uint64_t v = 0;
  const char* begin = target.data() + q + 6;
  std::from_chars(begin, target.data() + target.size(), v);
  return v;
}

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, const ApiRouter& router, EventBus& bus, asio::thread_pool& workers)
      : stream_(std::move(socket)), router_(router), bus_(bus), workers_(workers) {}

  void run() {
    asio::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    const std::string target(req_.target());
    if (websocket::is_upgrade(req_)) {
      if (target.substr(0, target.find('?')) == "/events") {
        stream_.expires_never();
        std::make_shared<EventSocket>(stream_.release_socket(), bus_)->run(std::move(req_), query_after(target));
        return;
      }
    }
    // Route off the io threads: fixes and localization can take a while.
    asio::post(workers_, [self = shared_from_this()] {
      const std::string method(self->req_.method_string());
      const std::string target(self->req_.target());
      ApiResponse r = self->router_.handle(method, target, self->req_.body());
      asio::post(self->stream_.get_executor(), [self, r = std::move(r)] { self->respond(r); });
    });
  }

  void respond(const ApiResponse& r) {
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(r.status), req_.version());
    res->set(http::field::server, "fldebug");
    res->set(http::field::content_type, "application/json");
    res->set(http::field::access_control_allow_origin, "*");
    res->keep_alive(req_.keep_alive());
    res->body() = r.body.dump();
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  const ApiRouter& router_;
  EventBus& bus_;
  asio::thread_pool& workers_;
};

}  // namespace

struct HttpServer::Impl {
  Impl(Controller& c, std::string addr, std::uint16_t p, std::size_t threads)
      : controller(c), router(c), address(std::move(addr)), requested_port(p), io_threads(std::max<std::size_t>(1, threads)),
        acceptor(ioc) {}

  void do_accept() {
    acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (!acceptor.is_open()) return;
      if (!ec) std::make_shared<HttpConnection>(std::move(socket), router, controller.events(), workers)->run();
      do_accept();
    });
  }

  Controller& controller;
  ApiRouter router;
  std::string address;
  std::uint16_t requested_port;
  std::size_t io_threads;
  asio::io_context ioc;
  asio::thread_pool workers{2};
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  std::atomic<bool> running{false};
  std::atomic<std::uint16_t> bound_port{0};
};

HttpServer::HttpServer(Controller& controller, std::string address, std::uint16_t port, std::size_t io_threads)
    : impl_(std::make_unique<Impl>(controller, std::move(address), port, io_threads)) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  Impl& s = *impl_;
  if (s.running.exchange(true)) return;
  beast::error_code ec;
  const auto addr = asio::ip::make_address(s.address, ec);
  if (ec) fail(ErrorCode::kInvalidArgument, "bad bind address '" + s.address + "'");
  const tcp::endpoint endpoint(addr, s.requested_port);
  s.acceptor.open(endpoint.protocol(), ec);
  if (!ec) s.acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor.bind(endpoint, ec);
  if (!ec) s.acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    s.running = false;
    fail(ErrorCode::kIo, "cannot listen on " + s.address + ":" + std::to_string(s.requested_port) + ": " + ec.message());
  }
  s.bound_port = s.acceptor.local_endpoint().port();
  s.do_accept();
  for (std::size_t i = 0; i < s.io_threads; ++i) s.threads.emplace_back([&s] { s.ioc.run(); });
}

void HttpServer::stop() {
  Impl& s = *impl_;
  if (!s.running.exchange(false)) return;
  asio::post(s.ioc, [&s] {
    beast::error_code ec;
    s.acceptor.close(ec);
  });
  s.ioc.stop();
  for (auto& t : s.threads)
    if (t.joinable()) t.join();
  s.threads.clear();
  s.workers.join();
}

void HttpServer::wait() {
  for (auto& t : impl_->threads)
    if (t.joinable()) t.join();
}

std::uint16_t HttpServer::port() const { return impl_->bound_port; }

}  // namespace fldebug::server
