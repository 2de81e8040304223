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

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <CLI11.hpp>

#include "fldebug/error.hpp"
#include "fldebug/experiments.hpp"
#include "fldebug/faultloc/localization.hpp"
#include "fldebug/io.hpp"
#include "fldebug/server/controller.hpp"
#include "fldebug/server/http_server.hpp"
#include "fldebug/server/repl.hpp"
#include "fldebug/telemetry/store.hpp"

namespace {

using namespace fldebug;

std::atomic<bool> g_stop{false};

struct SessionFlags {
  std::string config;
  std::optional<int> rounds;
  std::optional<std::size_t> clients;
  std::string faulty_ids;
  std::optional<double> noise_rate;
  std::string partition;
  std::optional<std::uint64_t> seed;
  std::string arch;
  std::optional<std::size_t> workers;

  void add_to(CLI::App& app) {
    app.add_option("config", config, "Session config (YAML)")->check(CLI::ExistingFile);
    app.add_option("--rounds", rounds, "Number of rounds");
    app.add_option("--clients", clients, "Number of clients (all participate each round)");
    app.add_option("--faulty-ids", faulty_ids, "Comma-separated faulty client ids");
    app.add_option("--noise-rate", noise_rate, "Label noise rate of faulty clients");
    app.add_option("--partition", partition, "iid or noniid");
    app.add_option("--seed", seed, "Seed for data, partition, faults and training");
    app.add_option("--arch", arch, "Layer sizes, e.g. 64,32,10");
    app.add_option("--workers", workers, "Local training threads");
  }

  fl::SessionConfig build() const {
    fl::SessionConfig cfg;
    if (!config.empty()) {
      cfg = fl::load_session_config(config);
    } else {
      experiments::ScenarioSpec spec;
      spec.faulty.clear();
      if (clients) spec.num_clients = *clients;
      if (!arch.empty()) spec.arch = model::ModelArch::parse(arch);
      cfg = experiments::scenario_config(spec);
    }
    if (rounds) cfg.num_rounds = *rounds;
    if (clients) {
      cfg.partition.num_clients = *clients;
      cfg.clients_per_round = *clients;
    }
    if (!faulty_ids.empty()) {
      cfg.faults.client_ids.clear();
      std::stringstream in(faulty_ids);
      for (std::string part; std::getline(in, part, ',');)
        if (!part.empty()) cfg.faults.client_ids.insert(static_cast<ClientId>(std::stoul(part)));
    }
    if (noise_rate) cfg.faults.noise_rate = *noise_rate;
    if (!partition.empty()) cfg.partition.mode = fl::parse_partition_mode(partition);
    if (seed) {
      cfg.master_seed = *seed;
      cfg.partition.seed = *seed;
      cfg.faults.seed = *seed;
      cfg.data.synthetic.seed = *seed;
    }
    if (!arch.empty()) {
      cfg.arch = model::ModelArch::parse(arch);
      cfg.data.synthetic.dim = cfg.arch.input_dim();
      cfg.data.synthetic.num_classes = cfg.arch.num_classes();
    }
    if (workers) cfg.workers = *workers;
    cfg.validate();
    return cfg;
  }
};

struct LocalizeFlags {
  std::optional<std::size_t> eta;
  std::size_t kappa = 10;
  float threshold = model::kDefaultActivationThreshold;

  void add_to(CLI::App& app) {
    app.add_option("--eta", eta, "Minimum agreeing clients per selected input");
    app.add_option("--kappa", kappa, "Number of test inputs");
    app.add_option("--threshold", threshold, "Neuron activation threshold");
  }
};

int cmd_run(const SessionFlags& flags, const LocalizeFlags& loc, const std::string& dir, bool localize) {
  const fl::SessionConfig cfg = flags.build();
  fl::Simulator sim(cfg);
  auto store = telemetry::TelemetryStore::create(dir, sim.initial_global(), fl::session_config_to_yaml(cfg));
  fl::RoundHooks hooks;
  hooks.after_commit = [&](const telemetry::RoundRecord& rec) {
    double loss = 0.0;
    for (const auto& [id, m] : rec.client_metrics) loss += m.training_loss;
    std::cout << "round " << rec.round_id << " participants " << rec.participant_ids.size() << " mean_loss "
              << io::format_exact(loss / static_cast<double>(rec.client_metrics.size())) << " test_accuracy "
              << io::format_exact(fl::evaluate(*rec.global_snapshot, sim.test_set())) << "\n";
  };
  sim.run_session(store, hooks);
  std::cout << "telemetry " << store.root().string() << " rounds " << store.round_count() << "\n";
  if (localize && cfg.clients_per_round >= 3) {
    const auto clients = faultloc::clients_of(*store.load_round(*store.latest_round()));
    faultloc::SelectionConfig sel;
    sel.kappa = loc.kappa;
    sel.eta = loc.eta;
    sel.seed = cfg.master_seed;
    faultloc::LocalizationConfig lc;
    lc.activation_threshold = loc.threshold;
    const auto suite = faultloc::select_test_inputs(clients, sel);
    const auto report = faultloc::localize(clients, suite, lc);
    std::cout << "localize verdict " << report.verdict << " inputs " << report.per_input.size() << "\n";
  }
  return 0;
}

std::unique_ptr<server::Controller> make_controller(const std::string& dir, const SessionFlags& flags, bool live) {
  if (!live) return std::make_unique<server::Controller>(telemetry::TelemetryStore::open(dir));
  const fl::SessionConfig cfg = flags.build();
  auto sim = std::make_shared<const fl::Simulator>(cfg);
  auto store = telemetry::TelemetryStore::create(dir, sim->initial_global(), fl::session_config_to_yaml(cfg));
  server::ControllerOptions opts;
  opts.simulator = sim;
  opts.live = true;
  return std::make_unique<server::Controller>(store, opts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning replay debugger"};
  app.require_subcommand(1);

  SessionFlags run_flags;
  LocalizeFlags run_loc;
  std::string run_dir = "telemetry";
  bool run_localize = false;
  auto* run = app.add_subcommand("run", "Run a simulated federation and record its telemetry");
  run_flags.add_to(*run);
  run_loc.add_to(*run);
  run->add_option("--telemetry-dir", run_dir, "Telemetry store directory (must not exist)");
  run->add_flag("--localize", run_localize, "Localize a faulty client on the last round");

  std::string debug_dir;
  std::string debug_script;
  SessionFlags debug_flags;
  bool debug_live = false;
  auto* debug = app.add_subcommand("debug", "Interactive replay debugger over a telemetry store");
  debug->add_option("telemetry-dir", debug_dir, "Telemetry store directory")->required();
  debug->add_option("--script", debug_script, "Read commands from a file instead of stdin")->check(CLI::ExistingFile);
  debug->add_flag("--live", debug_live, "Create the store and train live while debugging");
  debug->add_option("--config", debug_flags.config, "Session config for --live")->check(CLI::ExistingFile);
  debug->add_option("--rounds", debug_flags.rounds, "Number of rounds (--live)");
  debug->add_option("--clients", debug_flags.clients, "Number of clients (--live)");
  debug->add_option("--faulty-ids", debug_flags.faulty_ids, "Faulty client ids (--live)");
  debug->add_option("--noise-rate", debug_flags.noise_rate, "Noise rate (--live)");
  debug->add_option("--seed", debug_flags.seed, "Seed (--live)");

  std::string protocol;
  std::string output = "table";
  SessionFlags exp_flags;
  experiments::ProtocolOptions exp_opts;
  std::vector<std::size_t> exp_clients;
  auto* experiment = app.add_subcommand("experiment", "Run an evaluation protocol and print its table");
  experiment->add_option("protocol", protocol, "Protocol name")
      ->required()
      ->check(CLI::IsMember(experiments::protocol_names()));
  experiment->add_option("--output", output, "table or csv")->check(CLI::IsMember({"table", "csv"}));
  experiment->add_option("--seeds", exp_opts.seeds, "Seeds per setting");
  experiment->add_option("--kappa", exp_opts.kappa, "Test inputs per suite");
  experiment->add_option("--eta", exp_opts.eta, "Minimum agreeing clients");
  experiment->add_option("--threshold", exp_opts.threshold, "Activation threshold");
  experiment->add_option("--clients", exp_clients, "Client counts")->delimiter(',');
  experiment->add_option("--rounds", exp_opts.base.rounds, "Rounds per federation");
  experiment->add_option("--epochs", exp_opts.base.epochs, "Local epochs");
  experiment->add_option("--scratch-dir", exp_opts.scratch_dir, "Scratch directory for overhead runs");

  std::string serve_dir;
  std::string bind = "127.0.0.1";
  std::uint16_t port = 8080;
  bool serve_live = false;
  SessionFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "HTTP and WebSocket API over a telemetry store");
  serve->add_option("--telemetry-dir", serve_dir, "Telemetry store directory")->required();
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_flag("--live", serve_live, "Create the store and train live (start with POST /run)");
  serve->add_option("--config", serve_flags.config, "Session config for --live")->check(CLI::ExistingFile);
  serve->add_option("--rounds", serve_flags.rounds, "Number of rounds (--live)");
  serve->add_option("--clients", serve_flags.clients, "Number of clients (--live)");
  serve->add_option("--faulty-ids", serve_flags.faulty_ids, "Faulty client ids (--live)");
  serve->add_option("--noise-rate", serve_flags.noise_rate, "Noise rate (--live)");
  serve->add_option("--seed", serve_flags.seed, "Seed (--live)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags, run_loc, run_dir, run_localize);

    if (debug->parsed()) {
      auto controller = make_controller(debug_dir, debug_flags, debug_live);
      server::Repl repl(*controller, std::cout);
      if (!debug_script.empty()) {
        std::ifstream in(debug_script);
        repl.run(in);
      } else {
        repl.run(std::cin, isatty(0));
      }
      return 0;
    }

    if (experiment->parsed()) {
      if (!exp_clients.empty()) exp_opts.client_counts = exp_clients;
      const auto table = experiments::run_protocol(protocol, exp_opts);
      std::cout << (output == "csv" ? table.to_csv() : table.to_text());
      return 0;
    }

    if (serve->parsed()) {
      auto controller = make_controller(serve_dir, serve_flags, serve_live);
      server::HttpServer http(*controller, bind, port);
      http.start();
      std::cout << "listening " << bind << ":" << http.port() << std::endl;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      http.stop();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
