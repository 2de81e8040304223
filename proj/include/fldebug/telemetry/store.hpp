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

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fldebug/telemetry/record.hpp"

namespace fldebug::telemetry {

struct IntegrityReport {
  std::size_t rounds_checked = 0;
  std::vector<RoundId> failed_rounds;
  std::vector<std::string> messages;

  bool ok() const { return failed_rounds.empty(); }
  std::optional<RoundId> first_divergence() const {
    if (failed_rounds.empty()) return std::nullopt;
    return failed_rounds.front();
  }
};

struct StoreOptions {
  /// fsync blobs and manifests before the commit rename.
  bool sync_writes = false;
};

/// Append-only round store. Layout under the root directory:
///
///   store.yaml                 format marker, arch, session metadata
///   genesis.bin                initial global model
///   HEAD                       adopted timeline ("main" or a branch name)
///   rounds/<id>/manifest.yaml  ids, metrics, durations
///   rounds/<id>/client-<c>.bin one blob per client snapshot
///   rounds/<id>/global.bin
///   branches/<name>/branch.yaml, branches/<name>/rounds/...
///
/// A round becomes visible only once its directory is renamed into place.
/// Handles are cheap to copy and share state; one writer and any number of
/// concurrent readers are supported.
class TelemetryStore final : public RoundSink {
 public:
  static TelemetryStore create(const std::filesystem::path& root, const model::ModelSnapshot& genesis,
                               const std::string& metadata_yaml = "", StoreOptions options = {});
  static TelemetryStore open(const std::filesystem::path& root, StoreOptions options = {});

  RoundId record_round(const RoundRecord& record) override;
  std::shared_ptr<const RoundRecord> load_round(RoundId round_id) const;
  /// Re-reads the round from disk, bypassing the cache.
  RoundRecord read_round_uncached(RoundId round_id) const;
  std::optional<RoundId> latest_round() const;
  bool has_round(RoundId round_id) const;
  RoundId first_round() const;
  std::size_t round_count() const;

  IntegrityReport verify_integrity() const;

  const std::filesystem::path& root() const;
  const std::string& timeline() const;  // "main" or branch name
  bool is_branch() const { return timeline() != "main"; }
  const model::ModelArch& arch() const;
  model::ModelSnapshot genesis() const;
  std::string metadata_yaml() const;

  // Timelines.
  TelemetryStore create_branch(const std::string& name, RoundId from_round) const;
  TelemetryStore open_branch(const std::string& name) const;
  TelemetryStore main() const;
  std::vector<std::string> branches() const;
  std::string head() const;
  void set_head(const std::string& timeline) const;

  /// Resolves a RoundRecord::base_ref to the snapshot it names.
  SnapshotPtr resolve(const std::string& ref) const;
  /// The incoming global for a round of this timeline.
  SnapshotPtr incoming_global(const RoundRecord& record) const;

 private:
  struct State;
  explicit TelemetryStore(std::shared_ptr<State> state);
  std::shared_ptr<State> state_;
};

}  // namespace fldebug::telemetry
