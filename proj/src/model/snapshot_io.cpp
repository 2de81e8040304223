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

#include "fldebug/model/snapshot_io.hpp"

#include <yaml-cpp/yaml.h>

#include "fldebug/error.hpp"
#include "fldebug/io.hpp"

namespace fldebug::model {

namespace {
constexpr const char* kFormat = "fldebug-snapshot";
constexpr int kVersion = 1;

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}
}  // namespace

void emit_arch_manifest(YAML::Emitter& out, const ModelArch& arch) {
  out << YAML::Key << "arch" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (std::size_t s : arch.layer_sizes) out << s;
  out << YAML::EndSeq;
  out << YAML::Key << "dtype" << YAML::Value << "float32";
  out << YAML::Key << "byte_order" << YAML::Value << "little";
  out << YAML::Key << "layout" << YAML::Value << "layer-major, weights (out x in, row-major) then bias";
  out << YAML::Key << "element_count" << YAML::Value << arch.param_count();
  out << YAML::Key << "layers" << YAML::Value << YAML::BeginSeq;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "index" << YAML::Value << l;
    out << YAML::Key << "weight_rows" << YAML::Value << arch.layer_sizes[l + 1];
    out << YAML::Key << "weight_cols" << YAML::Value << arch.layer_sizes[l];
    out << YAML::Key << "bias_count" << YAML::Value << arch.layer_sizes[l + 1];
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
}

ModelArch parse_arch_manifest(const YAML::Node& node) {
  try {
    ModelArch arch;
    arch.layer_sizes = node["arch"].as<std::vector<std::size_t>>();
    arch.validate();
    if (node["dtype"] && node["dtype"].as<std::string>() != "float32")
      fail(ErrorCode::kDataLoss, "snapshot manifest: unsupported dtype");
    if (node["byte_order"] && node["byte_order"].as<std::string>() != "little")
      fail(ErrorCode::kDataLoss, "snapshot manifest: unsupported byte order");
    if (node["element_count"] && node["element_count"].as<std::size_t>() != arch.param_count())
      fail(ErrorCode::kDataLoss, "snapshot manifest: element_count does not match arch");
    return arch;
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::kDataLoss, std::string("snapshot manifest: ") + e.what());
  }
}

void write_blob(const ModelSnapshot& snapshot, const std::filesystem::path& path) {
  io::write_f32_le(path, snapshot.params());
}

ModelSnapshot read_blob(const ModelArch& arch, const std::filesystem::path& path) {
  return ModelSnapshot(arch, io::read_f32_le(path, arch.param_count()));
}

void save_snapshot(const ModelSnapshot& snapshot, const std::filesystem::path& stem) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value << kFormat;
  out << YAML::Key << "version" << YAML::Value << kVersion;
  emit_arch_manifest(out, snapshot.arch());
  out << YAML::Key << "default_activation_threshold" << YAML::Value
      << io::format_exact(kDefaultActivationThreshold);
  out << YAML::Key << "blob" << YAML::Value << with_suffix(stem, ".bin").filename().string();
  out << YAML::EndMap;
  write_blob(snapshot, with_suffix(stem, ".bin"));
  io::write_text(with_suffix(stem, ".yaml"), std::string(out.c_str()) + "\n");
}

ModelSnapshot load_snapshot(const std::filesystem::path& stem) {
  YAML::Node node;
  try {
    node = YAML::LoadFile(with_suffix(stem, ".yaml").string());
  } catch (const YAML::BadFile&) {
    fail(ErrorCode::kNotFound, "no snapshot manifest at " + with_suffix(stem, ".yaml").string());
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::kDataLoss, std::string("snapshot manifest: ") + e.what());
  }
  if (!node["format"] || node["format"].as<std::string>() != kFormat)
    fail(ErrorCode::kDataLoss, "not a snapshot manifest: " + stem.string());
  const ModelArch arch = parse_arch_manifest(node);
  const std::string blob = node["blob"] ? node["blob"].as<std::string>()
                                        : with_suffix(stem, ".bin").filename().string();
  return read_blob(arch, stem.parent_path() / blob);
}

}  // namespace fldebug::model
