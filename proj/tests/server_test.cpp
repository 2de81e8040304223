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

#include <regex>
#include <sstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include "fldebug/experiments.hpp"
#include "fldebug/server/api.hpp"
#include "fldebug/server/controller.hpp"
#include "fldebug/server/http_server.hpp"
#include "fldebug/server/repl.hpp"
#include "test_util.hpp"

namespace fldebug::server {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;
using nlohmann::json;
using fldebug::testing::TempDir;

fl::SessionConfig small_config(int rounds = 3) {
  experiments::ScenarioSpec spec;
  spec.rounds = rounds;
  spec.epochs = 2;
  spec.num_clients = 5;
  spec.arch = model::ModelArch{{64, 16, 10}};
  return experiments::scenario_config(spec);
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const fl::Simulator sim(small_config(), clock_);
    auto store = telemetry::TelemetryStore::create(root(), sim.initial_global(), fl::session_config_to_yaml(sim.config()));
    sim.run_session(store);
  }
  std::filesystem::path root() const { return dir_ / "store"; }
  std::unique_ptr<Controller> controller() {
    return std::make_unique<Controller>(telemetry::TelemetryStore::open(root()));
  }

  FrozenClock clock_;
  TempDir dir_{"srv"};
};

TEST_F(ServerTest, RoundsListing) {
  auto c = controller();
  ApiRouter api(*c);
  const auto r = api.handle("GET", "/rounds", "");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["timeline"], "main");
  ASSERT_EQ(r.body["rounds"].size(), 3u);
  const auto store = telemetry::TelemetryStore::open(root());
  for (RoundId i = 0; i < 3; ++i) {
    const auto& j = r.body["rounds"][i];
    EXPECT_EQ(j["round_id"], i);
    EXPECT_EQ(j["global_digest"], store.load_round(i)->global_snapshot->digest());
    EXPECT_EQ(j["participant_count"], 5);
  }
  const auto d = api.handle("GET", "/rounds/1", "");
  ASSERT_EQ(d.status, 200);
  ASSERT_EQ(d.body["clients"].size(), 5u);
  const auto rec = store.load_round(1);
  for (std::size_t k = 0; k < 5; ++k) {
    const ClientId id = rec->participant_ids[k];
    EXPECT_EQ(d.body["clients"][k]["client_id"], id);
    EXPECT_EQ(d.body["clients"][k]["snapshot_digest"], rec->client_snapshots.at(id)->digest());
  }
  EXPECT_FALSE(d.body["clients"][0].contains("params"));
  EXPECT_LT(d.body.dump().size(), 4096u);
}

TEST_F(ServerTest, ErrorStatuses) {
  auto c = controller();
  ApiRouter api(*c);
  EXPECT_EQ(api.handle("GET", "/rounds/9", "").status, 404);
  EXPECT_EQ(api.handle("GET", "/rounds/abc", "").status, 400);
  EXPECT_EQ(api.handle("GET", "/nowhere", "").status, 404);
  EXPECT_EQ(api.handle("DELETE", "/rounds", "").status, 405);
  EXPECT_EQ(api.handle("GET", "/sessions/1/step", "").status, 405);
  EXPECT_EQ(api.handle("POST", "/breakpoints", "{not json").status, 400);
  EXPECT_EQ(api.handle("POST", "/breakpoints", R"({"client_id": 1})").status, 400);
  EXPECT_EQ(api.handle("POST", "/breakpoints", R"({"round_id": -1})").status, 400);
  EXPECT_EQ(api.handle("POST", "/sessions", R"({"round_index": 7})").status, 404);
  EXPECT_EQ(api.handle("POST", "/sessions", R"({"round_index": 0, "granularity": "EPOCH"})").status, 400);
  EXPECT_EQ(api.handle("GET", "/sessions/s42", "").status, 404);
  const auto bad = api.handle("POST", "/sessions/s42/step", R"({"direction": "next"})");
  EXPECT_EQ(bad.status, 404);
  EXPECT_TRUE(bad.body["error"].contains("code"));
  EXPECT_TRUE(bad.body["error"].contains("message"));
  EXPECT_EQ(api.handle("POST", "/run", "").status, 400);
}

TEST_F(ServerTest, SessionLifecycle) {
  auto c = controller();
  ApiRouter api(*c);
  const auto open = api.handle("POST", "/sessions", R"({"round_index": 1})");
  ASSERT_EQ(open.status, 201);
  const std::string id = open.body["session_id"];
  EXPECT_EQ(open.body["mode"], "DETACHED");
  EXPECT_EQ(open.body["state"]["cursor"]["granularity"], "ROUND");
  EXPECT_TRUE(open.body["state"]["test_accuracy"].is_number());

  const std::string base = "/sessions/" + id;
  auto step = api.handle("POST", base + "/step", R"({"direction": "next"})");
  ASSERT_EQ(step.status, 200);
  EXPECT_EQ(step.body["view"]["cursor"]["round_index"], 2);
  step = api.handle("POST", base + "/step", R"({"direction": "next"})");
  EXPECT_TRUE(step.body["boundary"].get<bool>());
  step = api.handle("POST", base + "/step", R"({"direction": "in"})");
  EXPECT_EQ(step.body["view"]["cursor"]["client_position"], 1);
  EXPECT_EQ(api.handle("POST", base + "/step", R"({"direction": "sideways"})").status, 400);
  EXPECT_EQ(api.handle("POST", base + "/step", R"({})").status, 400);

  const auto loc = api.handle("POST", base + "/localize", R"({"kappa": 4})");
  ASSERT_EQ(loc.status, 200);
  EXPECT_EQ(loc.body["per_input"].size(), 4u);
  EXPECT_EQ(loc.body["forward_passes"], 20);

  const auto res = api.handle("POST", base + "/resume", "");
  ASSERT_EQ(res.status, 200);
  EXPECT_EQ(res.body["to_round"], 2);
  EXPECT_EQ(api.handle("POST", base + "/step", R"({"direction": "back"})").status, 409);
  EXPECT_EQ(api.handle("GET", "/sessions", "").body["sessions"], json::array({id}));
}

TEST_F(ServerTest, FixThroughApi) {
  auto c = controller();
  ApiRouter api(*c);
  const std::string id = api.handle("POST", "/sessions", R"({"round_index": 1})").body["session_id"];
  const std::string base = "/sessions/" + id;
  EXPECT_EQ(api.handle("POST", base + "/fix", R"({"faulty": [], "from_round": 1})").status, 400);
  EXPECT_EQ(api.handle("POST", base + "/fix", R"({"faulty": [3], "from_round": 9})").status, 404);
  EXPECT_EQ(api.handle("POST", base + "/fix", R"({"faulty": [3]})").status, 400);
  const auto fix = api.handle("POST", base + "/fix", R"({"faulty": [3], "from_round": 1})");
  ASSERT_EQ(fix.status, 200);
  EXPECT_EQ(fix.body["branch"], "fix-1");
  EXPECT_EQ(fix.body["mode"], "reaggregate");
  EXPECT_TRUE(fix.body["adopted"].get<bool>());
  EXPECT_TRUE(fix.body["corrected_accuracy"].is_number());
  EXPECT_EQ(api.handle("POST", base + "/resume", "").status, 409);

  const auto rounds = api.handle("GET", "/rounds", "");
  EXPECT_EQ(rounds.body["timeline"], "fix-1");
  EXPECT_EQ(rounds.body["branches"], json::array({"fix-1"}));
  ASSERT_EQ(rounds.body["rounds"].size(), 3u);
  EXPECT_EQ(rounds.body["rounds"][0]["participant_count"], 5);
  EXPECT_EQ(rounds.body["rounds"][1]["participant_count"], 4);
  EXPECT_EQ(rounds.body["rounds"][2]["global_digest"], fix.body["final_global_digest"]);
}

TEST_F(ServerTest, RestartIsStateless) {
  std::string before;
  {
    auto c = controller();
    ApiRouter api(*c);
    before = api.handle("GET", "/rounds", "").body.dump();
    const std::string id = api.handle("POST", "/sessions", R"({"round_index": 0})").body["session_id"];
    api.handle("POST", "/sessions/" + id + "/step", R"({"direction": "in"})");
  }
  auto c = controller();
  ApiRouter api(*c);
  EXPECT_EQ(api.handle("GET", "/rounds", "").body.dump(), before);
  EXPECT_EQ(api.handle("GET", "/sessions", "").body["sessions"], json::array());
}

TEST_F(ServerTest, ReplAndApiAgree) {
  auto c = controller();
  ApiRouter api(*c);
  std::ostringstream out;
  Repl repl(*c, out);
  repl.execute("open 1 3");
  repl.execute("inspect");
  const auto api_open = api.handle("POST", "/sessions", R"({"round_index": 1, "granularity": "CLIENT", "client_position": 3})");
  const auto& state = api_open.body["state"];
  std::smatch m;
  const std::string text = out.str();
  ASSERT_TRUE(std::regex_search(text, m, std::regex("partial_global ([0-9a-f]{64})")));
  EXPECT_EQ(m[1].str(), state["partial_global_digest"].get<std::string>());
  EXPECT_NE(text.find("cursor CLIENT(1, 3) timeline main participants 5"), std::string::npos);

  out.str("");
  repl.execute("next");
  const std::string after = out.str();
  const auto step = api.handle("POST", "/sessions/" + api_open.body["session_id"].get<std::string>() + "/step",
                               R"({"direction": "next"})");
  ASSERT_TRUE(std::regex_search(after, m, std::regex("partial_global ([0-9a-f]{64})")));
  EXPECT_EQ(m[1].str(), step.body["view"]["partial_global_digest"].get<std::string>());
}

TEST_F(ServerTest, ReplScriptAndErrors) {
  auto c = controller();
  std::ostringstream out;
  Repl repl(*c, out);
  std::istringstream script("break 1\nrun\nnext\nback\nbogus\nfix 3 --from 9\nrounds\nquit\ninspect\n");
  repl.run(script);
  const std::string text = out.str();
  EXPECT_NE(text.find("breakpoint 1 "), std::string::npos);
  EXPECT_NE(text.find("hit session s1"), std::string::npos);
  EXPECT_NE(text.find("error unknown command 'bogus'"), std::string::npos);
  EXPECT_NE(text.find("error not_found"), std::string::npos);
  EXPECT_NE(text.find("round 2 participants 5"), std::string::npos);
  EXPECT_NE(text.find("bye"), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 4), "bye\n");
}

TEST(EventBusTest, SequenceAndReplay) {
  EventBus bus(3);
  std::vector<std::uint64_t> seen;
  const auto token = bus.subscribe([&](const ApiEvent& e) { seen.push_back(e.seq); });
  for (int i = 0; i < 5; ++i) bus.publish(EventKind::kSessionState, {{"i", i}});
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(bus.last_seq(), 5u);
  ASSERT_EQ(bus.history().size(), 3u);
  EXPECT_EQ(bus.history().front().seq, 3u);
  std::vector<std::uint64_t> late;
  bus.subscribe_after(3, [&](const ApiEvent& e) { late.push_back(e.seq); });
  bus.unsubscribe(token);
  bus.publish(EventKind::kFixApplied, json::object());
  EXPECT_EQ(late, (std::vector<std::uint64_t>{4, 5, 6}));
  EXPECT_EQ(seen.size(), 5u);
  const auto j = bus.history().back().to_json();
  EXPECT_EQ(j["seq"], 6);
  EXPECT_EQ(j["kind"], "FIX_APPLIED");
}

TEST_F(ServerTest, LiveRunPublishesOrderedEvents) {
  TempDir live_dir("live");
  auto sim = std::make_shared<const fl::Simulator>(small_config(4), clock_);
  auto store = telemetry::TelemetryStore::create(live_dir / "s", sim->initial_global(),
                                                 fl::session_config_to_yaml(sim->config()));
  ControllerOptions opts;
  opts.simulator = sim;
  opts.live = true;
  Controller c(store, opts);
  ApiRouter api(c);
  std::vector<ApiEvent> events;
  std::mutex mu;
  c.events().subscribe([&](const ApiEvent& e) {
    std::lock_guard lock(mu);
    events.push_back(e);
  });
  ASSERT_EQ(api.handle("POST", "/breakpoints", R"({"round_id": 1})").status, 201);
  ASSERT_EQ(api.handle("POST", "/breakpoints", R"({"round_id": 1})").body["id"], 1);
  ASSERT_EQ(api.handle("POST", "/run", "").status, 202);
  c.wait_live();
  std::lock_guard lock(mu);
  std::vector<std::string> kinds;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i) EXPECT_GT(events[i].seq, events[i - 1].seq);
    kinds.push_back(to_string(events[i].kind));
  }
  EXPECT_EQ(kinds, (std::vector<std::string>{"ROUND_COMMITTED", "ROUND_COMMITTED", "BREAKPOINT_HIT", "ROUND_COMMITTED",
                                             "ROUND_COMMITTED"}));
  EXPECT_EQ(events[2].payload["breakpoint"]["round_id"], 1);
  EXPECT_EQ(events[2].payload["state"]["cursor"]["round_index"], 1);
  EXPECT_EQ(api.handle("GET", "/rounds", "").body["rounds"].size(), 4u);
  EXPECT_EQ(api.handle("GET", "/sessions/s1", "").body["mode"], "ATTACHED_LIVE");
}

class HttpClient {
 public:
  explicit HttpClient(std::uint16_t port) : port_(port) {}
  std::pair<int, json> request(http::verb verb, const std::string& target, const std::string& body = "") {
    tcp::socket socket(ioc_);
    boost::asio::connect(socket, tcp::resolver(ioc_).resolve("127.0.0.1", std::to_string(port_)));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    req.set(http::field::content_type, "application/json");
    req.body() = body;
    req.prepare_payload();
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
    return {static_cast<int>(res.result_int()), json::parse(res.body())};
  }

 private:
  boost::asio::io_context ioc_;
  std::uint16_t port_;
};

TEST_F(ServerTest, HttpAndWebSocketTransport) {
  auto c = controller();
  HttpServer server(*c, "127.0.0.1", 0, 2);
  server.start();
  ASSERT_NE(server.port(), 0);

  boost::asio::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  boost::asio::connect(ws.next_layer(), tcp::resolver(ioc).resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/events?after=0");

  HttpClient client(server.port());
  auto [status, rounds] = client.request(http::verb::get, "/rounds");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(rounds["rounds"].size(), 3u);
  auto [s404, missing] = client.request(http::verb::get, "/rounds/99");
  EXPECT_EQ(s404, 404);
  EXPECT_EQ(missing["error"]["code"], "not_found");
  auto [s201, opened] = client.request(http::verb::post, "/sessions", R"({"round_index": 0})");
  ASSERT_EQ(s201, 201);
  const std::string id = opened["session_id"];
  client.request(http::verb::post, "/sessions/" + id + "/step", R"({"direction": "next"})");
  client.request(http::verb::post, "/sessions/" + id + "/step", R"({"direction": "in"})");
  client.request(http::verb::post, "/sessions/" + id + "/localize", R"({"kappa": 2})");

  std::vector<json> frames;
  while (frames.size() < 4) {
    beast::flat_buffer buffer;
    ws.read(buffer);
    frames.push_back(json::parse(beast::buffers_to_string(buffer.data())));
  }
  EXPECT_EQ(frames[0]["kind"], "SESSION_STATE");
  EXPECT_EQ(frames[1]["payload"]["state"]["cursor"]["round_index"], 1);
  EXPECT_EQ(frames[2]["payload"]["state"]["cursor"]["granularity"], "CLIENT");
  EXPECT_EQ(frames[3]["kind"], "LOCALIZATION_RESULT");
  for (std::size_t i = 1; i < frames.size(); ++i) EXPECT_GT(frames[i]["seq"], frames[i - 1]["seq"]);

  // A late subscriber replays retained events after the given sequence number.
  websocket::stream<tcp::socket> late(ioc);
  boost::asio::connect(late.next_layer(), tcp::resolver(ioc).resolve("127.0.0.1", std::to_string(server.port())));
  late.handshake("127.0.0.1", "/events?after=" + frames[1]["seq"].dump());
  beast::flat_buffer buffer;
  late.read(buffer);
  EXPECT_EQ(json::parse(beast::buffers_to_string(buffer.data()))["seq"], frames[2]["seq"]);

  ws.close(websocket::close_code::normal);
  late.close(websocket::close_code::normal);
  server.stop();
}

}  // namespace
}  // namespace fldebug::server
