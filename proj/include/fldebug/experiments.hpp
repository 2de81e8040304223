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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "fldebug/faultloc/localization.hpp"
#include "fldebug/fl/session.hpp"

namespace fldebug::experiments {

/// A seeded federation with label-noise faults on synthetic blobs.
struct ScenarioSpec {
  std::size_t num_clients = 10;
  std::set<ClientId> faulty{3};
  double noise_rate = 1.0;
  fl::PartitionMode mode = fl::PartitionMode::kIid;
  std::uint64_t seed = 0;
  int rounds = 3;
  model::ModelArch arch{{64, 32, 10}};
  int epochs = 10;
  double learning_rate = 0.1;
  int batch_size = 32;
  std::size_t examples_per_client = 200;
  double center_scale = 0.2;
  double spread = 0.3;
  std::size_t workers = 1;
};

fl::SessionConfig scenario_config(const ScenarioSpec& spec);

/// Round records kept in memory.
class MemorySink final : public telemetry::RoundSink {
 public:
  RoundId record_round(const telemetry::RoundRecord& record) override;
  std::vector<telemetry::RoundRecord> rounds;
};

struct Federation {
  std::shared_ptr<const fl::Simulator> simulator;
  std::vector<telemetry::RoundRecord> rounds;
  double test_accuracy = 0.0;  // final global
  double training_seconds = 0.0;
};

Federation run_federation(const ScenarioSpec& spec, const Clock& clock = steady_clock());

struct LocalizationRun {
  double accuracy = 0.0;  // fraction of suite inputs accusing a faulty client
  ClientId verdict = 0;
  std::size_t ties = 0;
  std::size_t inputs = 0;
  double input_seconds = 0.0;
  double localization_seconds = 0.0;
  double test_accuracy = 0.0;
};

/// Trains the scenario, builds a test suite from the last round's client
/// models and localizes against the scenario's faulty set.
LocalizationRun localization_run(const ScenarioSpec& spec, const faultloc::SelectionConfig& selection,
                                 const faultloc::LocalizationConfig& cfg);

struct MultiFaultRun {
  bool exact = false;
  double recall = 0.0;  // |found & truth| / |truth|
  std::vector<ClientId> accused;
  bool partial = false;
};

MultiFaultRun multi_fault_run(const ScenarioSpec& spec, const faultloc::SelectionConfig& selection,
                              const faultloc::LocalizationConfig& cfg);

struct OverheadSample {
  std::size_t parties = 0;
  std::size_t params = 0;
  double base_aggregation = 0.0;       // median seconds per round
  double telemetry_aggregation = 0.0;  // aggregation + record_round
  double ratio() const { return telemetry_aggregation / base_aggregation; }
};

/// Aggregation with and without telemetry capture over stand-in snapshots
/// of `params` parameters, `rounds` rounds, written under `scratch_dir`.
OverheadSample measure_overhead(std::size_t parties, std::size_t params, int rounds, const std::string& scratch_dir,
                                std::uint64_t seed = 0);

struct RoundShare {
  std::size_t parties = 0;
  double round_seconds = 0.0;     // training + aggregation + record
  double telemetry_seconds = 0.0; // aggregation + record
  double share() const { return telemetry_seconds / round_seconds; }
};

/// Telemetry share of end-to-end trained rounds recorded to a real store.
RoundShare measure_round_share(const ScenarioSpec& spec, const std::string& scratch_dir);

struct ResultTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_text() const;
  std::string to_csv() const;
};

struct ProtocolOptions {
  ScenarioSpec base;
  std::size_t seeds = 5;
  std::size_t kappa = 10;
  std::size_t eta = 4;
  float threshold = model::kDefaultActivationThreshold;
  std::vector<std::size_t> client_counts{10, 30, 50};
  std::string scratch_dir = "/tmp/fldebug-overhead";
};

/// Protocol names: localization, noise-sweep, threshold-sweep, multi-fault,
/// scalability, overhead.
std::vector<std::string> protocol_names();
ResultTable run_protocol(const std::string& name, const ProtocolOptions& options);

ResultTable localization_protocol(const ProtocolOptions& o);
ResultTable noise_sweep_protocol(const ProtocolOptions& o);
ResultTable threshold_sweep_protocol(const ProtocolOptions& o);
ResultTable multi_fault_protocol(const ProtocolOptions& o);
ResultTable scalability_protocol(const ProtocolOptions& o);
ResultTable overhead_protocol(const ProtocolOptions& o);

}  // namespace fldebug::experiments
