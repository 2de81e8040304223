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
#include <string>

#include "fldebug/model/mlp.hpp"

namespace YAML {
class Node;
class Emitter;
}  // namespace YAML

namespace fldebug::model {

/// Writes `<stem>.yaml` (manifest) and `<stem>.bin` (little-endian float32
/// parameters, layer-major, weights then bias per layer).
void save_snapshot(const ModelSnapshot& snapshot, const std::filesystem::path& stem);
ModelSnapshot load_snapshot(const std::filesystem::path& stem);

/// Manifest fields shared with the telemetry store.
void emit_arch_manifest(YAML::Emitter& out, const ModelArch& arch);
ModelArch parse_arch_manifest(const YAML::Node& node);

/// Raw blob I/O for callers that keep the manifest elsewhere.
void write_blob(const ModelSnapshot& snapshot, const std::filesystem::path& path);
ModelSnapshot read_blob(const ModelArch& arch, const std::filesystem::path& path);

}  // namespace fldebug::model
