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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Arguments select a subset by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fldebug/debugger/live.hpp"
#include "fldebug/debugger/session.hpp"
#include "fldebug/experiments.hpp"
#include "fldebug/faultloc/localization.hpp"
#include "fldebug/faultloc/selection.hpp"
#include "fldebug/fl/fedavg.hpp"
#include "fldebug/seed.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fldebug::acceptance {
namespace {

namespace fs = std::filesystem;
using experiments::ScenarioSpec;

constexpr std::size_t kSeeds = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

std::string sci(double v) {
  std::ostringstream out;
  out.setf(std::ios::scientific);
  out.precision(2);
  out << v;
  return out.str();
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

ScenarioSpec scenario(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.num_clients = 10;
  spec.faulty = {3};
  spec.noise_rate = 1.0;
  spec.rounds = 3;
  spec.arch = model::ModelArch{{64, 32, 10}};
  spec.seed = seed;
  return spec;
}

faultloc::SelectionConfig selection(std::uint64_t seed) {
  faultloc::SelectionConfig sel;
  sel.kappa = 10;
  sel.eta = 4;
  sel.seed = seed;
  return sel;
}

faultloc::LocalizationConfig localization(float threshold = 0.003f) {
  faultloc::LocalizationConfig cfg;
  cfg.activation_threshold = threshold;
  return cfg;
}

Outcome criterion1() {
  const double start = now();
  std::vector<double> iid, non_iid;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    for (auto mode : {fl::PartitionMode::kIid, fl::PartitionMode::kNonIidQuantity}) {
      auto spec = scenario(s);
      spec.mode = mode;
      const auto run = experiments::localization_run(spec, selection(s), localization());
      (mode == fl::PartitionMode::kIid ? iid : non_iid).push_back(run.accuracy);
    }
  }
  const double seconds = now() - start;
  const bool pass = mean(iid) >= 0.9 && mean(non_iid) >= 0.9 && seconds <= 300.0;
  return {pass, "iid " + fmt(mean(iid)) + " non_iid " + fmt(mean(non_iid)) + " (>= 0.900) seconds " + fmt(seconds, 1) +
                    " (<= 300)"};
}

Outcome criterion2() {
  std::vector<double> by_rate;
  std::string detail;
  for (double rate : {1.0, 0.4, 0.0}) {
    std::vector<double> acc;
    for (std::size_t s = 0; s < kSeeds; ++s) {
      auto spec = scenario(s);
      spec.noise_rate = rate;
      acc.push_back(experiments::localization_run(spec, selection(s), localization()).accuracy);
    }
    by_rate.push_back(mean(acc));
    detail += "noise " + fmt(rate, 1) + " -> " + fmt(mean(acc)) + "; ";
  }
  const bool pass = by_rate[0] >= by_rate[1] && by_rate[1] >= by_rate[2] && by_rate[0] > by_rate[2];
  return {pass, detail + "require 1.0 >= 0.4 >= 0.0 and 1.0 > 0.0"};
}

Outcome criterion3() {
  const std::vector<std::pair<std::size_t, std::set<ClientId>>> settings{{10, {1, 6}}, {15, {1, 6, 11}}};
  bool pass = true;
  std::string detail;
  for (const auto& [n, faulty] : settings) {
    std::size_t exact = 0;
    for (std::size_t s = 0; s < kSeeds; ++s) {
      auto spec = scenario(s);
      spec.num_clients = n;
      spec.faulty = faulty;
      exact += experiments::multi_fault_run(spec, selection(s), localization()).exact ? 1 : 0;
    }
    const double rate = static_cast<double>(exact) / kSeeds;
    pass = pass && rate >= 0.8;
    detail += std::to_string(faulty.size()) + "/" + std::to_string(n) + " exact " + fmt(rate, 2) + "; ";
  }
  return {pass, detail + "require >= 0.80"};
}

Outcome criterion4() {
  bool pass = true;
  std::string detail;
  const std::vector<float> thresholds{0.003f, 0.5f};
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const auto spec = scenario(s);
    const auto fed = experiments::run_federation(spec);
    const auto clients = faultloc::clients_of(fed.rounds.back());
    const auto suite = faultloc::select_test_inputs(clients, selection(s));
    const auto points = faultloc::threshold_sweep(clients, suite, thresholds, spec.faulty);
    pass = pass && points[0].accuracy >= points[1].accuracy;
    detail += fmt(points[0].accuracy, 2) + ">=" + fmt(points[1].accuracy, 2) + " ";
    for (const auto& c : clients)
      for (const auto& e : suite.entries)
        pass = pass && model::forward(*c.snapshot, e.input, std::numeric_limits<float>::infinity()).profile.size() == 0;
  }
  return {pass, "accuracy(0.003)>=accuracy(0.5) per seed: " + detail + "; profiles empty at +inf"};
}

Outcome criterion5() {
  const std::string scratch = (fs::temp_directory_path() / "fldebug-acceptance-overhead").string();
  bool pass = true;
  std::string detail;
  for (std::size_t n : {10u, 30u, 50u}) {
    const auto sample = experiments::measure_overhead(n, 1'000'000, 10, scratch);
    auto spec = scenario(0);
    spec.num_clients = n;
    spec.epochs = 10;
    const auto share = experiments::measure_round_share(spec, scratch);
    pass = pass && sample.ratio() <= 2.0 && share.share() <= 0.10;
    detail += "n=" + std::to_string(n) + " ratio " + fmt(sample.ratio(), 2) + " share " + fmt(share.share(), 4) + "; ";
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  return {pass, detail + "require ratio <= 2.00 and share <= 0.1000"};
}

std::vector<faultloc::ClientModel> random_clients(std::size_t n, const model::ModelArch& arch, std::uint64_t seed) {
  std::vector<faultloc::ClientModel> clients;
  for (std::size_t i = 0; i < n; ++i)
    clients.push_back({static_cast<ClientId>(i),
                       std::make_shared<const model::ModelSnapshot>(model::init_model(arch, derive_seed(seed, {i})))});
  return clients;
}

Outcome criterion6() {
  const model::ModelArch arch{{64, 32, 10}};
  bool counts = true;
  std::string detail = "forward passes";
  std::map<std::size_t, double> seconds;
  for (std::size_t n : {5u, 10u, 30u, 50u}) {
    const auto clients = random_clients(n, arch, 60 + n);
    const auto x = model::kaiming_random_input(model::InputShape{{64}}, n);
    const std::size_t passes = faultloc::localize_on_input(clients, x, localization()).forward_passes;
    counts = counts && passes == n;
    detail += " " + std::to_string(passes) + "/" + std::to_string(n);
    std::vector<double> samples;
    for (int rep = 0; rep < 200; ++rep) {
      const double t0 = now();
      faultloc::localize_on_input(clients, x, localization());
      samples.push_back(now() - t0);
    }
    seconds[n] = median(samples);
  }
  const double ratio = seconds[50] / seconds[10];
  return {counts && ratio <= 8.0, detail + "; time(50)/time(10) " + fmt(ratio, 2) + " (<= 8.00)"};
}

Outcome criterion7() {
  std::mt19937_64 rng(7);
  // (a) fedavg against a scalar oracle.
  std::size_t fedavg_ok = 0, fedavg_total = 0;
  std::uniform_real_distribution<double> weight(0.5, 500.0);
  for (int trial = 0; trial < 120; ++trial) {
    const model::ModelArch arch{{5, static_cast<std::size_t>(4 + trial % 3), 3}};
    std::vector<model::ModelSnapshot> snaps;
    std::vector<double> w;
    for (int i = 0; i < 1 + trial % 8; ++i) {
      snaps.push_back(testing::random_snapshot(arch, rng));
      w.push_back(trial % 2 ? std::floor(weight(rng)) : weight(rng));
    }
    std::vector<const model::ModelSnapshot*> ptrs;
    for (const auto& s : snaps) ptrs.push_back(&s);
    fedavg_ok += fl::fedavg(snaps, w).bit_equal(testing::scalar_fedavg(ptrs, w)) ? 1 : 0;
    ++fedavg_total;
  }
  // (b) leave-one-out localization against subset materialization.
  std::size_t loc_ok = 0, loc_total = 0;
  for (std::size_t n = 3; n <= 8; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const model::ModelArch arch{{6, 10, 8, 3}};
      const auto base = testing::random_snapshot(arch, rng);
      std::vector<faultloc::ClientModel> clients;
      std::normal_distribution<double> noise(0.0, 0.4);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> p(base.params().begin(), base.params().end());
        for (float& v : p) v += static_cast<float>(noise(rng));
        clients.push_back({static_cast<ClientId>(2 * i + 1), std::make_shared<const model::ModelSnapshot>(arch, std::move(p))});
      }
      std::shuffle(clients.begin(), clients.end(), rng);
      const auto x = testing::random_tensor(6, rng);
      for (float threshold : {0.0f, 0.003f, 0.3f}) {
        const auto got = faultloc::localize_on_input(clients, x, localization(threshold));
        const auto want = testing::brute_force_localize(clients, x, threshold);
        loc_ok += (got.accused == want.accused && got.max_common_activations == want.max_common && got.tie == want.tie) ? 1 : 0;
        ++loc_total;
      }
    }
  }
  // (c) gradients against central finite differences.
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const model::ModelArch arch{{4, 5, 3}};
    const auto m = testing::random_snapshot(arch, rng, 0.7);
    const auto x = testing::random_tensor(4, rng);
    const std::size_t label = rng() % 3;
    const std::vector<model::Tensor> xs{x};
    const std::vector<std::size_t> ys{label};
    const auto lg = model::loss_and_gradient(m, xs, ys, 0.0);
    const testing::ReferenceMlp ref{arch.layer_sizes};
    const auto xd = testing::to_double(x.values());
    auto p = testing::to_double(m.params());
    double diff2 = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + 1e-6;
      const double up = ref.loss(p, xd, label);
      p[i] = saved - 1e-6;
      const double down = ref.loss(p, xd, label);
      p[i] = saved;
      const double fd = (up - down) / 2e-6;
      diff2 += (fd - lg.gradient[i]) * (fd - lg.gradient[i]);
      norm2 += fd * fd;
    }
    if (norm2 > 0) worst = std::max(worst, std::sqrt(diff2 / norm2));
  }
  const bool pass = fedavg_ok == fedavg_total && fedavg_total >= 100 && loc_ok == loc_total && loc_total >= 50 * 3 &&
                    worst <= 1e-3;
  return {pass, "(a) fedavg " + std::to_string(fedavg_ok) + "/" + std::to_string(fedavg_total) + " bit-exact; (b) localize " +
                    std::to_string(loc_ok) + "/" + std::to_string(loc_total) + " match; (c) worst gradient rel err " +
                    sci(worst) + " (<= 1e-3)"};
}

Outcome criterion8() {
  const FrozenClock clock;
  const testing::TempDir dir("acceptance-replay");
  auto sim = std::make_shared<const fl::Simulator>(experiments::scenario_config(scenario(0)), clock);
  auto create = [&](const std::string& name) {
    return telemetry::TelemetryStore::create(dir / name, sim->initial_global(), fl::session_config_to_yaml(sim->config()));
  };
  debugger::LiveRun::create(sim, create("plain"))->run();

  std::vector<std::future<std::size_t>> tours;
  debugger::LiveCallbacks cb;
  cb.on_breakpoint = [&](const debugger::Breakpoint&, std::shared_ptr<debugger::DebugSession> s) {
    tours.push_back(std::async(std::launch::async, [s] {
      std::size_t steps = 0;
      s->step_in();
      while (!s->step_next().boundary) ++steps;
      while (!s->step_back().boundary) ++steps;
      s->step_out();
      while (!s->step_next().boundary) ++steps;
      return steps;
    }));
  };
  auto live = debugger::LiveRun::create(sim, create("observed"), cb);
  live->set_breakpoint({0, std::nullopt});
  live->set_breakpoint({1, 3});
  live->run();
  std::size_t steps = 0;
  for (auto& t : tours) steps += t.get();
  const bool identical = testing::tree_bytes(dir / "plain") == testing::tree_bytes(dir / "observed");

  const auto store = telemetry::TelemetryStore::open(dir / "observed");
  std::size_t rounds_equal = 0;
  for (RoundId r = 0; r <= *store.latest_round(); ++r) {
    const auto rec = store.load_round(r);
    const auto view = debugger::open_session(store, debugger::DebugCursor::client(r, rec->participant_ids.size()))->view();
    rounds_equal += view.partial_global->bit_equal(*rec->global_snapshot) ? 1 : 0;
  }
  const std::size_t rounds = store.round_count();
  return {identical && rounds_equal == rounds && !tours.empty(),
          std::string("stores ") + (identical ? "byte-identical" : "DIFFER") + " after " + std::to_string(steps) +
              " attached steps; prefix(|P|) == global in " + std::to_string(rounds_equal) + "/" + std::to_string(rounds) +
              " rounds"};
}

Outcome criterion9() {
  std::size_t improved = 0;
  bool integrity = true, untouched = true;
  std::string detail;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const testing::TempDir dir("acceptance-fix");
    auto sim = std::make_shared<const fl::Simulator>(experiments::scenario_config(scenario(s)));
    auto store = telemetry::TelemetryStore::create(dir / "s", sim->initial_global(), fl::session_config_to_yaml(sim->config()));
    sim->run_session(store);
    const auto before = testing::tree_bytes(dir / "s" / "rounds");
    const double contaminated = fl::evaluate(*store.load_round(*store.latest_round())->global_snapshot, sim->test_set());

    debugger::SessionOptions opts;
    opts.simulator = sim;
    debugger::FixRequest req;
    req.faulty = {3};
    req.from_round = 0;
    req.mode = debugger::FixMode::kRetrain;
    req.branch_name = "retrain";
    const auto fix = debugger::open_session(store, debugger::DebugCursor::round(0), opts)->fix_and_replay(req);
    const double corrected = fl::evaluate(*fix.final_global, sim->test_set());
    improved += corrected >= contaminated ? 1 : 0;
    detail += fmt(corrected) + ">=" + fmt(contaminated) + " ";

    req.mode = debugger::FixMode::kReaggregate;
    req.branch_name = "reaggregate";
    debugger::open_session(store.main(), debugger::DebugCursor::round(0), opts)->fix_and_replay(req);
    integrity = integrity && store.open_branch("reaggregate").verify_integrity().ok() &&
                store.open_branch("retrain").verify_integrity().ok() && store.verify_integrity().ok();
    untouched = untouched && testing::tree_bytes(dir / "s" / "rounds") == before;
  }
  return {improved >= 4 && integrity && untouched,
          "retrain accuracy >= contaminated in " + std::to_string(improved) + "/5 seeds (" + detail +
              "); integrity " + (integrity ? "ok" : "FAILED") + "; originals " + (untouched ? "untouched" : "MODIFIED")};
}

}  // namespace
}  // namespace fldebug::acceptance

int main(int argc, char** argv) {
  using namespace fldebug::acceptance;
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::set<std::size_t> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::stoul(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!chosen.empty() && !chosen.count(i + 1)) continue;
    Outcome o;
    const double t0 = now();
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << " [" << fmt(now() - t0, 1)
              << "s]" << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
