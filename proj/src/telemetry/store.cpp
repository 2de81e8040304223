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

#include "fldebug/telemetry/store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <shared_mutex>

#include "fldebug/error.hpp"
#include "fldebug/io.hpp"
#include "fldebug/model/snapshot_io.hpp"

namespace fs = std::filesystem;

namespace fldebug::telemetry {

namespace {

constexpr const char* kStoreFormat = "fldebug-telemetry";
constexpr int kStoreVersion = 1;

std::string round_dir_name(RoundId id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(id));
  return buf;
}

std::string client_blob_name(ClientId id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "client-%06u.bin", static_cast<unsigned>(id));
  return buf;
}

void fsync_path(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) fail(ErrorCode::kIo, "cannot open for fsync: " + path.string());
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) fail(ErrorCode::kIo, "fsync failed: " + path.string());
}

bool valid_branch_name(const std::string& name) {
  if (name.empty() || name == "main" || name.size() > 64) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

YAML::Node load_yaml(const fs::path& path) {
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    fail(ErrorCode::kNotFound, "missing " + path.string());
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::kDataLoss, path.string() + ": " + e.what());
  }
}

void emit_hyperparams(YAML::Emitter& out, const model::TrainConfig& cfg) {
  out << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "learning_rate" << YAML::Value << io::format_exact(cfg.learning_rate);
  out << YAML::Key << "epochs" << YAML::Value << cfg.epochs;
  out << YAML::Key << "batch_size" << YAML::Value << cfg.batch_size;
  out << YAML::Key << "weight_decay" << YAML::Value << io::format_exact(cfg.weight_decay);
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::EndMap;
}

model::TrainConfig parse_hyperparams(const YAML::Node& n) {
  model::TrainConfig cfg;
  cfg.learning_rate = io::parse_double(n["learning_rate"].as<std::string>());
  cfg.epochs = n["epochs"].as<int>();
  cfg.batch_size = n["batch_size"].as<int>();
  cfg.weight_decay = io::parse_double(n["weight_decay"].as<std::string>());
  cfg.seed = n["seed"].as<std::uint64_t>();
  return cfg;
}

std::string round_manifest(const RoundRecord& rec, const std::string& timeline) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "round_id" << YAML::Value << rec.round_id;
  out << YAML::Key << "timeline" << YAML::Value << timeline;
  out << YAML::Key << "base_ref" << YAML::Value << rec.base_ref;
  out << YAML::Key << "aggregation_duration" << YAML::Value << io::format_exact(rec.aggregation_duration);
  out << YAML::Key << "weighting" << YAML::Value << to_string(rec.weighting);
  out << YAML::Key << "arch" << YAML::Value << YAML::Flow << rec.global_snapshot->arch().layer_sizes;
  out << YAML::Key << "participants" << YAML::Value << YAML::Flow << rec.participant_ids;
  out << YAML::Key << "clients" << YAML::Value << YAML::BeginSeq;
  for (ClientId c : rec.participant_ids) {
    const ClientMetrics& m = rec.client_metrics.at(c);
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << c;
    out << YAML::Key << "blob" << YAML::Value << client_blob_name(c);
    out << YAML::Key << "training_loss" << YAML::Value << io::format_exact(m.training_loss);
    out << YAML::Key << "response_time" << YAML::Value << io::format_exact(m.response_time);
    out << YAML::Key << "dataset_size" << YAML::Value << m.dataset_size;
    out << YAML::Key << "hyperparams" << YAML::Value;
    emit_hyperparams(out, m.hyperparams);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "global_blob" << YAML::Value << "global.bin";
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace

struct TelemetryStore::State {
  fs::path root;
  std::string timeline;
  fs::path dir;
  RoundId first_round = 0;
  model::ModelArch arch;
  StoreOptions options;

  mutable std::shared_mutex mu;
  mutable std::vector<std::shared_ptr<const RoundRecord>> cache;  // index = id - first_round
  mutable std::size_t committed = 0;
  std::mutex write_mu;

  fs::path round_dir(RoundId id) const { return dir / "rounds" / round_dir_name(id); }

  // Picks up rounds committed by other handles or processes.
  std::size_t refresh() const {
    std::unique_lock lock(mu);
    while (fs::exists(round_dir(first_round + committed))) ++committed;
    if (cache.size() < committed) cache.resize(committed);
    return committed;
  }
};

TelemetryStore::TelemetryStore(std::shared_ptr<State> state) : state_(std::move(state)) {}

TelemetryStore TelemetryStore::create(const fs::path& root, const model::ModelSnapshot& genesis,
                                      const std::string& metadata_yaml, StoreOptions options) {
  if (fs::exists(root / "store.yaml")) fail(ErrorCode::kConflict, "telemetry store already exists at " + root.string());
  std::error_code ec;
  fs::create_directories(root / "rounds", ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + root.string() + ": " + ec.message());
  fs::create_directories(root / "branches", ec);

  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value << kStoreFormat;
  out << YAML::Key << "version" << YAML::Value << kStoreVersion;
  model::emit_arch_manifest(out, genesis.arch());
  out << YAML::Key << "genesis_blob" << YAML::Value << "genesis.bin";
  out << YAML::EndMap;
  model::write_blob(genesis, root / "genesis.bin");
  io::write_text(root / "session.yaml", metadata_yaml);
  io::write_text(root / "HEAD", "main\n");
  io::write_text(root / "store.yaml", std::string(out.c_str()) + "\n");
  return open(root, options);
}

TelemetryStore TelemetryStore::open(const fs::path& root, StoreOptions options) {
  const YAML::Node node = load_yaml(root / "store.yaml");
  if (!node["format"] || node["format"].as<std::string>() != kStoreFormat)
    fail(ErrorCode::kDataLoss, root.string() + " is not a telemetry store");
  auto state = std::make_shared<State>();
  state->root = root;
  state->timeline = "main";
  state->dir = root;
  state->arch = model::parse_arch_manifest(node);
  state->options = options;
  state->refresh();
  return TelemetryStore(std::move(state));
}

const fs::path& TelemetryStore::root() const { return state_->root; }
const std::string& TelemetryStore::timeline() const { return state_->timeline; }
const model::ModelArch& TelemetryStore::arch() const { return state_->arch; }
RoundId TelemetryStore::first_round() const { return state_->first_round; }

std::size_t TelemetryStore::round_count() const { return state_->refresh(); }

model::ModelSnapshot TelemetryStore::genesis() const {
  return model::read_blob(state_->arch, state_->root / "genesis.bin");
}

std::string TelemetryStore::metadata_yaml() const { return io::read_text(state_->root / "session.yaml"); }

RoundId TelemetryStore::record_round(const RoundRecord& record) {
  State& s = *state_;
  std::lock_guard write_lock(s.write_mu);
  const std::size_t count = s.refresh();
  const RoundId expected = s.first_round + count;
  if (record.round_id != expected) {
    fail(ErrorCode::kConflict, "record_round: round " + std::to_string(record.round_id) +
                                   " out of order, expected " + std::to_string(expected));
  }
  record.validate();
  require(record.global_snapshot->arch() == s.arch, "record_round: arch differs from store arch");

  const fs::path final_dir = s.round_dir(record.round_id);
  const fs::path tmp_dir = final_dir.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp_dir, ec);
  try {
    fs::create_directories(tmp_dir);
    for (ClientId c : record.participant_ids)
      model::write_blob(*record.client_snapshots.at(c), tmp_dir / client_blob_name(c));
    model::write_blob(*record.global_snapshot, tmp_dir / "global.bin");
    io::write_text(tmp_dir / "manifest.yaml", round_manifest(record, s.timeline));
    if (s.options.sync_writes) {
      for (const auto& entry : fs::directory_iterator(tmp_dir)) fsync_path(entry.path());
      fsync_path(tmp_dir);
    }
    fs::rename(tmp_dir, final_dir);
    if (s.options.sync_writes) fsync_path(final_dir.parent_path());
  } catch (const Error&) {
    fs::remove_all(tmp_dir, ec);
    throw;
  } catch (const std::exception& e) {
    fs::remove_all(tmp_dir, ec);
    fail(ErrorCode::kIo, std::string("record_round: ") + e.what());
  }

  auto committed = std::make_shared<const RoundRecord>(record);
  std::unique_lock lock(s.mu);
  const std::size_t index = record.round_id - s.first_round;
  if (s.cache.size() <= index) s.cache.resize(index + 1);
  s.cache[index] = std::move(committed);
  s.committed = std::max(s.committed, index + 1);
  return record.round_id;
}

RoundRecord TelemetryStore::read_round_uncached(RoundId round_id) const {
  const State& s = *state_;
  const fs::path dir = s.round_dir(round_id);
  if (round_id < s.first_round || !fs::exists(dir))
    fail(ErrorCode::kNotFound, "round " + std::to_string(round_id) + " not found in timeline " + s.timeline);
  const YAML::Node node = load_yaml(dir / "manifest.yaml");
  RoundRecord rec;
  try {
    rec.round_id = node["round_id"].as<RoundId>();
    rec.base_ref = node["base_ref"].as<std::string>();
    rec.aggregation_duration = io::parse_double(node["aggregation_duration"].as<std::string>());
    rec.weighting = parse_weighting(node["weighting"].as<std::string>());
    model::ModelArch arch;
    arch.layer_sizes = node["arch"].as<std::vector<std::size_t>>();
    if (!(arch == s.arch)) fail(ErrorCode::kDataLoss, "round manifest arch differs from store arch");
    rec.participant_ids = node["participants"].as<std::vector<ClientId>>();
    for (const YAML::Node& c : node["clients"]) {
      ClientMetrics m;
      m.client_id = c["id"].as<ClientId>();
      m.training_loss = io::parse_double(c["training_loss"].as<std::string>());
      m.response_time = io::parse_double(c["response_time"].as<std::string>());
      m.dataset_size = c["dataset_size"].as<std::size_t>();
      m.hyperparams = parse_hyperparams(c["hyperparams"]);
      rec.client_snapshots[m.client_id] =
          std::make_shared<const model::ModelSnapshot>(model::read_blob(arch, dir / c["blob"].as<std::string>()));
      rec.client_metrics[m.client_id] = m;
    }
    rec.global_snapshot = std::make_shared<const model::ModelSnapshot>(
        model::read_blob(arch, dir / node["global_blob"].as<std::string>()));
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::kDataLoss, "round " + std::to_string(round_id) + " manifest: " + e.what());
  }
  if (rec.round_id != round_id) fail(ErrorCode::kDataLoss, "round manifest id mismatch in " + dir.string());
  rec.validate();
  return rec;
}

std::shared_ptr<const RoundRecord> TelemetryStore::load_round(RoundId round_id) const {
  const State& s = *state_;
  if (round_id < s.first_round)
    fail(ErrorCode::kNotFound, "round " + std::to_string(round_id) + " not found in timeline " + s.timeline);
  const std::size_t index = round_id - s.first_round;
  {
    std::shared_lock lock(s.mu);
    if (index < s.cache.size() && s.cache[index]) return s.cache[index];
  }
  if (index >= s.refresh())
    fail(ErrorCode::kNotFound, "round " + std::to_string(round_id) + " not found in timeline " + s.timeline);
  auto rec = std::make_shared<const RoundRecord>(read_round_uncached(round_id));
  std::unique_lock lock(s.mu);
  if (!s.cache[index]) s.cache[index] = rec;
  return s.cache[index];
}

std::optional<RoundId> TelemetryStore::latest_round() const {
  const std::size_t n = state_->refresh();
  if (n == 0) return std::nullopt;
  return state_->first_round + n - 1;
}

bool TelemetryStore::has_round(RoundId round_id) const {
  return round_id >= state_->first_round && round_id - state_->first_round < state_->refresh();
}

IntegrityReport TelemetryStore::verify_integrity() const {
  IntegrityReport report;
  const auto latest = latest_round();
  if (!latest) return report;
  for (RoundId id = first_round(); id <= *latest; ++id) {
    ++report.rounds_checked;
    try {
      const RoundRecord rec = read_round_uncached(id);
      model::ModelSnapshot expected;
      if (rec.participant_ids.empty()) {
        expected = *incoming_global(rec);
      } else {
        expected = rec.aggregate_prefix(rec.participant_ids.size());
      }
      if (!expected.bit_equal(*rec.global_snapshot)) {
        report.failed_rounds.push_back(id);
        report.messages.push_back("round " + std::to_string(id) + ": stored global differs from re-aggregated clients");
      }
    } catch (const Error& e) {
      report.failed_rounds.push_back(id);
      report.messages.push_back("round " + std::to_string(id) + ": " + e.what());
    }
  }
  return report;
}

// ---------------------------------------------------------------- timelines

TelemetryStore TelemetryStore::create_branch(const std::string& name, RoundId from_round) const {
  if (!valid_branch_name(name)) fail(ErrorCode::kInvalidArgument, "invalid branch name '" + name + "'");
  const fs::path dir = state_->root / "branches" / name;
  if (fs::exists(dir)) fail(ErrorCode::kConflict, "branch '" + name + "' already exists");
  fs::create_directories(dir / "rounds");
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << name;
  out << YAML::Key << "parent" << YAML::Value << state_->timeline;
  out << YAML::Key << "from_round" << YAML::Value << from_round;
  out << YAML::EndMap;
  io::write_text(dir / "branch.yaml", std::string(out.c_str()) + "\n");
  return open_branch(name);
}

TelemetryStore TelemetryStore::open_branch(const std::string& name) const {
  if (name == "main") return main();
  if (!valid_branch_name(name)) fail(ErrorCode::kInvalidArgument, "invalid branch name '" + name + "'");
  const fs::path dir = state_->root / "branches" / name;
  const YAML::Node node = load_yaml(dir / "branch.yaml");
  auto state = std::make_shared<State>();
  state->root = state_->root;
  state->timeline = name;
  state->dir = dir;
  state->first_round = node["from_round"].as<RoundId>();
  state->arch = state_->arch;
  state->options = state_->options;
  state->refresh();
  return TelemetryStore(std::move(state));
}

TelemetryStore TelemetryStore::main() const {
  if (state_->timeline == "main") return *this;
  return open(state_->root, state_->options);
}

std::vector<std::string> TelemetryStore::branches() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(state_->root / "branches", ec)) {
    if (fs::exists(entry.path() / "branch.yaml")) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string TelemetryStore::head() const {
  std::error_code ec;
  if (!fs::exists(state_->root / "HEAD", ec)) return "main";
  std::string text = io::read_text(state_->root / "HEAD");
  while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
  return text.empty() ? "main" : text;
}

void TelemetryStore::set_head(const std::string& timeline) const {
  if (timeline != "main" && !fs::exists(state_->root / "branches" / timeline / "branch.yaml"))
    fail(ErrorCode::kNotFound, "no timeline '" + timeline + "'");
  const fs::path tmp = state_->root / "HEAD.tmp";
  io::write_text(tmp, timeline + "\n");
  fs::rename(tmp, state_->root / "HEAD");
}

SnapshotPtr TelemetryStore::resolve(const std::string& ref) const {
  if (ref == "genesis") return std::make_shared<const model::ModelSnapshot>(genesis());
  auto parse_round = [&](const std::string& text) -> RoundId {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::logic_error&) {
      fail(ErrorCode::kDataLoss, "malformed snapshot reference '" + ref + "'");
    }
  };
  if (ref.rfind("main:", 0) == 0) return main().load_round(parse_round(ref.substr(5)))->global_snapshot;
  if (ref.rfind("branch:", 0) == 0) {
    const auto colon = ref.rfind(':');
    if (colon <= 7) fail(ErrorCode::kDataLoss, "malformed snapshot reference '" + ref + "'");
    const std::string name = ref.substr(7, colon - 7);
    return open_branch(name).load_round(parse_round(ref.substr(colon + 1)))->global_snapshot;
  }
  fail(ErrorCode::kDataLoss, "unknown snapshot reference '" + ref + "'");
}

SnapshotPtr TelemetryStore::incoming_global(const RoundRecord& record) const { return resolve(record.base_ref); }

}  // namespace fldebug::telemetry
