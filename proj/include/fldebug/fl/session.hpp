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
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fldebug/clock.hpp"
#include "fldebug/fl/data.hpp"
#include "fldebug/fl/partition.hpp"
#include "fldebug/model/mlp.hpp"
#include "fldebug/telemetry/record.hpp"

namespace fldebug::fl {

struct FaultSpec {
  std::set<ClientId> client_ids;
  double noise_rate = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

/// Where training and test data come from.
struct DataSource {
  enum class Kind { kSynthetic, kIdx } kind = Kind::kSynthetic;
  SyntheticSpec synthetic;
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

struct SessionConfig {
  int num_rounds = 3;
  std::size_t clients_per_round = 10;
  model::ModelArch arch{{64, 32, 10}};
  model::TrainConfig train_cfg;
  PartitionPlan partition;
  FaultSpec faults;
  std::uint64_t master_seed = 0;
  DataSource data;
  telemetry::Weighting weighting = telemetry::Weighting::kDatasetSize;
  /// Local-training fan-out; results are merged in client-id order.
  std::size_t workers = 1;

  void validate() const;
};

/// Plain-text (YAML) config whose keys mirror SessionConfig field names.
SessionConfig load_session_config(const std::filesystem::path& path);
SessionConfig parse_session_config(const std::string& yaml_text);
std::string session_config_to_yaml(const SessionConfig& cfg);

/// Fraction of examples whose prediction equals the label.
double evaluate(const model::ModelSnapshot& model, const LabeledDataset& test);

/// Called around each commit; the live coordinator and tests hook in here.
struct RoundHooks {
  std::function<void(RoundId)> before_commit;
  std::function<void(const telemetry::RoundRecord&)> after_commit;
};

/// In-process federation: owns every client's shard (with faults injected)
/// and the held-out test set.
class Simulator {
 public:
  explicit Simulator(SessionConfig cfg, const Clock& clock = steady_clock());

  const SessionConfig& config() const { return cfg_; }
  const LabeledDataset& test_set() const { return test_; }
  const LabeledDataset& shard(ClientId id) const { return shards_.at(id); }
  std::size_t num_clients() const { return shards_.size(); }

  model::ModelSnapshot initial_global() const;

  /// Seeded sample of clients_per_round eligible clients, ascending ids.
  std::vector<ClientId> select_participants(RoundId round, const std::set<ClientId>& excluded = {}) const;

  /// Every participant trains from `global`; the new global is their
  /// weighted average.
  telemetry::RoundRecord run_round(const model::ModelSnapshot& global, RoundId round_id,
                                   const std::vector<ClientId>& participants,
                                   const std::string& base_ref) const;

  /// Runs num_rounds rounds, committing each to `sink` before the next.
  model::ModelSnapshot run_session(telemetry::RoundSink& sink, const RoundHooks& hooks = {}) const;

 private:
  SessionConfig cfg_;
  const Clock& clock_;
  std::vector<LabeledDataset> shards_;
  LabeledDataset test_;
};

}  // namespace fldebug::fl
