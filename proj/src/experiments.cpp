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

#include "fldebug/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fldebug/error.hpp"
#include "fldebug/fl/fedavg.hpp"
#include "fldebug/io.hpp"
#include "fldebug/seed.hpp"
#include "fldebug/telemetry/store.hpp"

namespace fldebug::experiments {

namespace fs = std::filesystem;

namespace {

double now() { return steady_clock().now_seconds(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string percent(double fraction) { return fixed(100.0 * fraction, 1); }

std::set<ClientId> spread_faults(std::size_t k, std::size_t n) {
  std::set<ClientId> out;
  for (std::size_t i = 0; i < k; ++i) out.insert(static_cast<ClientId>(1 + i * (n / k)));
  return out;
}

faultloc::SelectionConfig selection_for(const ProtocolOptions& o, std::uint64_t seed) {
  faultloc::SelectionConfig sel;
  sel.kappa = o.kappa;
  sel.eta = o.eta;
  sel.seed = seed;
  return sel;
}

}  // namespace

fl::SessionConfig scenario_config(const ScenarioSpec& spec) {
  fl::SessionConfig cfg;
  cfg.num_rounds = spec.rounds;
  cfg.clients_per_round = spec.num_clients;
  cfg.arch = spec.arch;
  cfg.train_cfg.learning_rate = spec.learning_rate;
  cfg.train_cfg.epochs = spec.epochs;
  cfg.train_cfg.batch_size = spec.batch_size;
  cfg.partition.num_clients = spec.num_clients;
  cfg.partition.mode = spec.mode;
  cfg.partition.seed = spec.seed;
  cfg.faults.client_ids = spec.faulty;
  cfg.faults.noise_rate = spec.noise_rate;
  cfg.faults.seed = spec.seed;
  cfg.master_seed = spec.seed;
  cfg.data.synthetic.num_classes = spec.arch.num_classes();
  cfg.data.synthetic.dim = spec.arch.input_dim();
  cfg.data.synthetic.train_count = spec.examples_per_client * spec.num_clients;
  cfg.data.synthetic.center_scale = spec.center_scale;
  cfg.data.synthetic.spread = spec.spread;
  cfg.data.synthetic.seed = spec.seed;
  cfg.workers = spec.workers;
  cfg.validate();
  return cfg;
}

RoundId MemorySink::record_round(const telemetry::RoundRecord& record) {
  rounds.push_back(record);
  return record.round_id;
}

Federation run_federation(const ScenarioSpec& spec, const Clock& clock) {
  Federation fed;
  fed.simulator = std::make_shared<const fl::Simulator>(scenario_config(spec), clock);
  MemorySink sink;
  const double start = now();
  const auto global = fed.simulator->run_session(sink);
  fed.training_seconds = now() - start;
  fed.rounds = std::move(sink.rounds);
  fed.test_accuracy = fl::evaluate(global, fed.simulator->test_set());
  return fed;
}

LocalizationRun localization_run(const ScenarioSpec& spec, const faultloc::SelectionConfig& selection,
                                 const faultloc::LocalizationConfig& cfg) {
  const Federation fed = run_federation(spec);
  const auto clients = faultloc::clients_of(fed.rounds.back());
  LocalizationRun run;
  const double t0 = now();
  const auto suite = faultloc::select_test_inputs(clients, selection);
  run.input_seconds = now() - t0;
  const auto report = faultloc::localize(clients, suite, cfg, spec.faulty);
  run.localization_seconds = report.seconds;
  run.accuracy = report.accuracy_vs_truth.value_or(0.0);
  run.verdict = report.verdict;
  run.inputs = report.per_input.size();
  for (const auto& v : report.per_input) run.ties += v.tie ? 1 : 0;
  run.test_accuracy = fed.test_accuracy;
  return run;
}

MultiFaultRun multi_fault_run(const ScenarioSpec& spec, const faultloc::SelectionConfig& selection,
                              const faultloc::LocalizationConfig& cfg) {
  const Federation fed = run_federation(spec);
  const auto clients = faultloc::clients_of(fed.rounds.back());
  const auto result = faultloc::localize_multi(clients, selection, cfg, spec.faulty.size());
  MultiFaultRun run;
  run.accused = result.accused;
  run.partial = result.partial;
  const std::set<ClientId> found(result.accused.begin(), result.accused.end());
  std::size_t hits = 0;
  for (ClientId c : spec.faulty) hits += found.count(c);
  run.recall = spec.faulty.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(spec.faulty.size());
  run.exact = found == spec.faulty;
  return run;
}

OverheadSample measure_overhead(std::size_t parties, std::size_t params, int rounds, const std::string& scratch_dir,
                                std::uint64_t seed) {
  require(parties >= 1 && params >= 1 && rounds >= 1, "measure_overhead: parties, params and rounds must be positive");
  // One hidden layer sized to reach roughly `params` parameters.
  const std::size_t width = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(params))));
  const model::ModelArch arch{{width, width, 10}};
  std::vector<telemetry::SnapshotPtr> snaps;
  snaps.reserve(parties);
  for (std::size_t i = 0; i < parties; ++i)
    snaps.push_back(std::make_shared<const model::ModelSnapshot>(model::init_model(arch, derive_seed(seed, {i}))));

  const fs::path root = fs::path(scratch_dir) / ("overhead-" + std::to_string(parties));
  std::error_code ec;
  fs::remove_all(root, ec);
  auto store = telemetry::TelemetryStore::create(root, *snaps.front());

  std::vector<double> base, with_telemetry;
  for (int r = 0; r < rounds; ++r) {
    telemetry::RoundRecord rec;
    rec.round_id = static_cast<RoundId>(r);
    rec.base_ref = r == 0 ? "genesis" : telemetry::main_ref(r - 1);
    for (std::size_t i = 0; i < parties; ++i) {
      const auto id = static_cast<ClientId>(i);
      rec.participant_ids.push_back(id);
      rec.client_snapshots[id] = snaps[i];
      ClientMetrics m;
      m.client_id = id;
      m.dataset_size = 100 + i;
      rec.client_metrics[id] = m;
    }
    // Vanilla: aggregation only.
    double t0 = now();
    auto plain = rec.aggregate_prefix(parties);
    base.push_back(now() - t0);
    // Telemetry: the same aggregation followed by a durable commit.
    t0 = now();
    rec.global_snapshot = std::make_shared<const model::ModelSnapshot>(rec.aggregate_prefix(parties));
    store.record_round(rec);
    with_telemetry.push_back(now() - t0);
    if (!plain.bit_equal(*rec.global_snapshot)) fail(ErrorCode::kDataLoss, "measure_overhead: aggregation not deterministic");
    // Keep disk use bounded; the committed count already advanced.
    char name[16];
    std::snprintf(name, sizeof(name), "%06d", r);
    fs::remove_all(root / "rounds" / name, ec);
  }
  fs::remove_all(root, ec);
  return {parties, arch.param_count(), median(base), median(with_telemetry)};
}

RoundShare measure_round_share(const ScenarioSpec& spec, const std::string& scratch_dir) {
  const auto cfg = scenario_config(spec);
  fl::Simulator sim(cfg);
  const fs::path root = fs::path(scratch_dir) / ("share-" + std::to_string(spec.num_clients));
  std::error_code ec;
  fs::remove_all(root, ec);
  auto store = telemetry::TelemetryStore::create(root, sim.initial_global(), fl::session_config_to_yaml(cfg));
  RoundShare share;
  share.parties = spec.num_clients;
  model::ModelSnapshot global = sim.initial_global();
  std::string base_ref = "genesis";
  for (int r = 0; r < cfg.num_rounds; ++r) {
    const auto round = static_cast<RoundId>(r);
    const double t0 = now();
    auto rec = sim.run_round(global, round, sim.select_participants(round), base_ref);
    const double t1 = now();
    store.record_round(rec);
    const double t2 = now();
    share.round_seconds += t2 - t0;
    share.telemetry_seconds += rec.aggregation_duration + (t2 - t1);
    global = *rec.global_snapshot;
    base_ref = telemetry::main_ref(round);
  }
  fs::remove_all(root, ec);
  return share;
}

std::string ResultTable::to_text() const {
  std::vector<std::size_t> width(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  if (!title.empty()) out << title << "\n";
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      out << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << cell;
    }
    out << "\n";
  };
  line(columns);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out << std::string(total + 2 * (columns.empty() ? 0 : columns.size() - 1), '-') << "\n";
  for (const auto& row : rows) line(row);
  return out.str();
}

std::string ResultTable::to_csv() const {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << quote(columns[c]);
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << quote(row[c]);
    out << "\n";
  }
  return out.str();
}

ResultTable localization_protocol(const ProtocolOptions& o) {
  ResultTable t;
  t.title = "Single faulty client localization";
  t.columns = {"Clients", "Dataset", "Architecture", "Accuracy % (IID)", "Accuracy % (Non-IID)",
               "Avg. Input Time (s)", "Avg. Localization Time (s)"};
  faultloc::LocalizationConfig lc;
  lc.activation_threshold = o.threshold;
  for (std::size_t n : o.client_counts) {
    std::vector<double> acc_iid, acc_non, input_t, loc_t;
    for (auto mode : {fl::PartitionMode::kIid, fl::PartitionMode::kNonIidQuantity}) {
      for (std::size_t s = 0; s < o.seeds; ++s) {
        ScenarioSpec spec = o.base;
        spec.num_clients = n;
        spec.mode = mode;
        spec.seed = s;
        if (spec.faulty.empty() || *spec.faulty.rbegin() >= n) spec.faulty = {static_cast<ClientId>(std::min<std::size_t>(3, n - 1))};
        const auto run = localization_run(spec, selection_for(o, s), lc);
        (mode == fl::PartitionMode::kIid ? acc_iid : acc_non).push_back(run.accuracy);
        input_t.push_back(run.input_seconds);
        loc_t.push_back(run.localization_seconds);
      }
    }
    t.rows.push_back({std::to_string(n), "synthetic", o.base.arch.to_string(), percent(mean(acc_iid)),
                      percent(mean(acc_non)), fixed(mean(input_t), 3), fixed(mean(loc_t), 3)});
  }
  return t;
}

ResultTable noise_sweep_protocol(const ProtocolOptions& o) {
  ResultTable t;
  t.title = "Localization accuracy by noise rate";
  t.columns = {"Noise Rate", "Accuracy %", "Ties", "Test Accuracy %"};
  faultloc::LocalizationConfig lc;
  lc.activation_threshold = o.threshold;
  for (double rate : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    std::vector<double> acc, test;
    std::size_t ties = 0;
    for (std::size_t s = 0; s < o.seeds; ++s) {
      ScenarioSpec spec = o.base;
      spec.noise_rate = rate;
      spec.seed = s;
      const auto run = localization_run(spec, selection_for(o, s), lc);
      acc.push_back(run.accuracy);
      test.push_back(run.test_accuracy);
      ties += run.ties;
    }
    t.rows.push_back({fixed(rate, 1), percent(mean(acc)), std::to_string(ties), percent(mean(test))});
  }
  return t;
}

ResultTable threshold_sweep_protocol(const ProtocolOptions& o) {
  ResultTable t;
  t.title = "Localization accuracy by activation threshold";
  t.columns = {"Threshold", "Accuracy %", "Ties"};
  const std::vector<float> thresholds{0.0f, 0.003f, 0.01f, 0.05f, 0.1f, 0.2f, 0.5f, 1.0f};
  std::vector<std::vector<double>> acc(thresholds.size());
  std::vector<std::size_t> ties(thresholds.size(), 0);
  for (std::size_t s = 0; s < o.seeds; ++s) {
    ScenarioSpec spec = o.base;
    spec.seed = s;
    const Federation fed = run_federation(spec);
    const auto clients = faultloc::clients_of(fed.rounds.back());
    const auto suite = faultloc::select_test_inputs(clients, selection_for(o, s));
    const auto points = faultloc::threshold_sweep(clients, suite, thresholds, spec.faulty);
    for (std::size_t i = 0; i < points.size(); ++i) {
      acc[i].push_back(points[i].accuracy);
      ties[i] += points[i].ties;
    }
  }
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    t.rows.push_back({io::format_exact(thresholds[i]), percent(mean(acc[i])), std::to_string(ties[i])});
  return t;
}

ResultTable multi_fault_protocol(const ProtocolOptions& o) {
  ResultTable t;
  t.title = "Multiple faulty clients";
  t.columns = {"Faulty Clients", "Total Clients", "Architecture", "Accuracy % (Synthetic)", "Exact Recovery %"};
  faultloc::LocalizationConfig lc;
  lc.activation_threshold = o.threshold;
  const std::vector<std::pair<std::size_t, std::size_t>> settings{{2, 10}, {3, 15}, {2, 30}, {3, 30}, {5, 30}};
  for (const auto& [k, n] : settings) {
    std::vector<double> recall;
    std::size_t exact = 0;
    for (std::size_t s = 0; s < o.seeds; ++s) {
      ScenarioSpec spec = o.base;
      spec.num_clients = n;
      spec.faulty = spread_faults(k, n);
      spec.seed = s;
      const auto run = multi_fault_run(spec, selection_for(o, s), lc);
      recall.push_back(run.recall);
      exact += run.exact ? 1 : 0;
    }
    t.rows.push_back({std::to_string(k), std::to_string(n), o.base.arch.to_string(), percent(mean(recall)),
                      percent(static_cast<double>(exact) / static_cast<double>(o.seeds))});
  }
  return t;
}

ResultTable scalability_protocol(const ProtocolOptions& o) {
  ResultTable t;
  t.title = "Localization cost by number of clients";
  t.columns = {"Clients", "Algo. 1 Time", "Algo. 2 Time", "Training Time", "Forward Passes / Input"};
  faultloc::LocalizationConfig lc;
  lc.activation_threshold = o.threshold;
  for (std::size_t n : {10, 20, 30, 40, 50}) {
    ScenarioSpec spec = o.base;
    spec.num_clients = n;
    spec.rounds = 1;
    const Federation fed = run_federation(spec);
    const auto clients = faultloc::clients_of(fed.rounds.back());
    double t0 = now();
    const auto suite = faultloc::select_test_inputs(clients, selection_for(o, spec.seed));
    const double input_time = now() - t0;
    const auto report = faultloc::localize(clients, suite, lc);
    const double per_input = suite.empty() ? 0.0 : static_cast<double>(report.forward_passes) / suite.size();
    t.rows.push_back({std::to_string(n), fixed(input_time, 4), fixed(report.seconds, 4), fixed(fed.training_seconds, 3),
                      fixed(per_input, 1)});
  }
  return t;
}

ResultTable overhead_protocol(const ProtocolOptions& o) {
  ResultTable t;
  t.title = "Telemetry overhead on aggregation";
  t.columns = {"Parties", "Params", "BaseAgg", "FedDebugAgg", "Ratio", "Telemetry % of Round"};
  for (std::size_t n : o.client_counts) {
    const auto sample = measure_overhead(n, 1'000'000, 5, o.scratch_dir, o.base.seed);
    ScenarioSpec spec = o.base;
    spec.num_clients = n;
    const auto share = measure_round_share(spec, o.scratch_dir);
    t.rows.push_back({std::to_string(n), std::to_string(sample.params), fixed(sample.base_aggregation, 4),
                      fixed(sample.telemetry_aggregation, 4), fixed(sample.ratio(), 2), percent(share.share())});
  }
  return t;
}

std::vector<std::string> protocol_names() {
  return {"localization", "noise-sweep", "threshold-sweep", "multi-fault", "scalability", "overhead"};
}

ResultTable run_protocol(const std::string& name, const ProtocolOptions& options) {
  if (name == "localization") return localization_protocol(options);
  if (name == "noise-sweep") return noise_sweep_protocol(options);
  if (name == "threshold-sweep") return threshold_sweep_protocol(options);
  if (name == "multi-fault") return multi_fault_protocol(options);
  if (name == "scalability") return scalability_protocol(options);
  if (name == "overhead") return overhead_protocol(options);
  fail(ErrorCode::kInvalidArgument, "unknown protocol '" + name + "'");
}

}  // namespace fldebug::experiments
