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

#include "fldebug/fl/session.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <exception>
#include <random>
#include <thread>

#include "fldebug/error.hpp"
#include "fldebug/fl/fedavg.hpp"
#include "fldebug/io.hpp"
#include "fldebug/seed.hpp"

namespace fldebug::fl {

namespace {
enum SeedPurpose : std::uint64_t { kInitSeed = 1, kSelectSeed = 2, kTrainSeed = 3, kNoiseSeed = 4 };
}

void SessionConfig::validate() const {
  require(num_rounds >= 1, "session: num_rounds must be >= 1");
  arch.validate();
  train_cfg.validate();
  partition.validate();
  require(clients_per_round >= 2, "session: clients_per_round must be >= 2");
  require(clients_per_round <= partition.num_clients, "session: clients_per_round exceeds num_clients");
  require(faults.noise_rate >= 0.0 && faults.noise_rate <= 1.0, "session: noise_rate must be in [0, 1]");
  for (ClientId c : faults.client_ids)
    require(c < partition.num_clients, "session: faulty client " + std::to_string(c) + " does not exist");
  require(workers >= 1, "session: workers must be >= 1");
  if (data.kind == DataSource::Kind::kSynthetic) {
    data.synthetic.validate();
    require(data.synthetic.dim == arch.input_dim(), "session: synthetic dim must equal arch input dim");
    require(data.synthetic.num_classes <= arch.num_classes(), "session: more classes than model outputs");
  }
}

// ------------------------------------------------------------------- config

namespace {

template <typename T>
void read_opt(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) out = node[key].as<T>();
}

void read_double(const YAML::Node& node, const char* key, double& out) {
  if (node[key]) out = io::parse_double(node[key].as<std::string>());
}

void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!node || !node.IsMap()) return;
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(ErrorCode::kInvalidArgument, "session config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

SessionConfig parse_session_config(const std::string& yaml_text) {
  SessionConfig cfg;
  try {
    const YAML::Node root = YAML::Load(yaml_text);
    require(root.IsMap(), "session config: expected a key-value map");
    check_keys(root, {"num_rounds", "clients_per_round", "arch", "train_cfg", "partition", "faults", "master_seed",
                      "data", "weighting", "workers"},
               "top level");
    read_opt(root, "num_rounds", cfg.num_rounds);
    read_opt(root, "clients_per_round", cfg.clients_per_round);
    if (root["arch"]) cfg.arch.layer_sizes = root["arch"].as<std::vector<std::size_t>>();
    if (const auto t = root["train_cfg"]) {
      check_keys(t, {"learning_rate", "epochs", "batch_size", "weight_decay", "seed"}, "train_cfg");
      read_double(t, "learning_rate", cfg.train_cfg.learning_rate);
      read_opt(t, "epochs", cfg.train_cfg.epochs);
      read_opt(t, "batch_size", cfg.train_cfg.batch_size);
      read_double(t, "weight_decay", cfg.train_cfg.weight_decay);
      read_opt(t, "seed", cfg.train_cfg.seed);
    }
    if (const auto p = root["partition"]) {
      check_keys(p, {"mode", "num_clients", "seed", "min_fraction"}, "partition");
      if (p["mode"]) cfg.partition.mode = parse_partition_mode(p["mode"].as<std::string>());
      read_opt(p, "num_clients", cfg.partition.num_clients);
      read_opt(p, "seed", cfg.partition.seed);
      read_double(p, "min_fraction", cfg.partition.min_fraction);
    }
    if (const auto f = root["faults"]) {
      check_keys(f, {"client_ids", "noise_rate", "seed"}, "faults");
      if (f["client_ids"]) {
        const auto ids = f["client_ids"].as<std::vector<ClientId>>();
        cfg.faults.client_ids = std::set<ClientId>(ids.begin(), ids.end());
      }
      read_double(f, "noise_rate", cfg.faults.noise_rate);
      read_opt(f, "seed", cfg.faults.seed);
    }
    read_opt(root, "master_seed", cfg.master_seed);
    if (root["weighting"]) cfg.weighting = telemetry::parse_weighting(root["weighting"].as<std::string>());
    read_opt(root, "workers", cfg.workers);
    if (const auto d = root["data"]) {
      check_keys(d, {"kind", "synthetic", "train_images", "train_labels", "test_images", "test_labels"}, "data");
      const std::string kind = d["kind"] ? d["kind"].as<std::string>() : "synthetic";
      if (kind == "synthetic") {
        cfg.data.kind = DataSource::Kind::kSynthetic;
      } else if (kind == "idx") {
        cfg.data.kind = DataSource::Kind::kIdx;
      } else {
        fail(ErrorCode::kInvalidArgument, "session config: unknown data kind '" + kind + "'");
      }
      if (const auto s = d["synthetic"]) {
        check_keys(s, {"num_classes", "dim", "train_count", "test_count", "center_scale", "spread", "seed"},
                   "data.synthetic");
        auto& sp = cfg.data.synthetic;
        read_opt(s, "num_classes", sp.num_classes);
        read_opt(s, "dim", sp.dim);
        read_opt(s, "train_count", sp.train_count);
        read_opt(s, "test_count", sp.test_count);
        read_double(s, "center_scale", sp.center_scale);
        read_double(s, "spread", sp.spread);
        read_opt(s, "seed", sp.seed);
      }
      auto path_of = [&](const char* key, std::filesystem::path& out) {
        if (d[key]) out = d[key].as<std::string>();
      };
      path_of("train_images", cfg.data.train_images);
      path_of("train_labels", cfg.data.train_labels);
      path_of("test_images", cfg.data.test_images);
      path_of("test_labels", cfg.data.test_labels);
    }
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("session config: ") + e.what());
  }
  return cfg;
}

SessionConfig load_session_config(const std::filesystem::path& path) {
  return parse_session_config(io::read_text(path));
}

std::string session_config_to_yaml(const SessionConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "num_rounds" << YAML::Value << cfg.num_rounds;
  out << YAML::Key << "clients_per_round" << YAML::Value << cfg.clients_per_round;
  out << YAML::Key << "arch" << YAML::Value << YAML::Flow << cfg.arch.layer_sizes;
  out << YAML::Key << "train_cfg" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "learning_rate" << YAML::Value << io::format_exact(cfg.train_cfg.learning_rate);
  out << YAML::Key << "epochs" << YAML::Value << cfg.train_cfg.epochs;
  out << YAML::Key << "batch_size" << YAML::Value << cfg.train_cfg.batch_size;
  out << YAML::Key << "weight_decay" << YAML::Value << io::format_exact(cfg.train_cfg.weight_decay);
  out << YAML::Key << "seed" << YAML::Value << cfg.train_cfg.seed;
  out << YAML::EndMap;
  out << YAML::Key << "partition" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << to_string(cfg.partition.mode);
  out << YAML::Key << "num_clients" << YAML::Value << cfg.partition.num_clients;
  out << YAML::Key << "seed" << YAML::Value << cfg.partition.seed;
  out << YAML::Key << "min_fraction" << YAML::Value << io::format_exact(cfg.partition.min_fraction);
  out << YAML::EndMap;
  out << YAML::Key << "faults" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "client_ids" << YAML::Value << YAML::Flow
      << std::vector<ClientId>(cfg.faults.client_ids.begin(), cfg.faults.client_ids.end());
  out << YAML::Key << "noise_rate" << YAML::Value << io::format_exact(cfg.faults.noise_rate);
  out << YAML::Key << "seed" << YAML::Value << cfg.faults.seed;
  out << YAML::EndMap;
  out << YAML::Key << "master_seed" << YAML::Value << cfg.master_seed;
  out << YAML::Key << "weighting" << YAML::Value << telemetry::to_string(cfg.weighting);
  out << YAML::Key << "workers" << YAML::Value << cfg.workers;
  out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  if (cfg.data.kind == DataSource::Kind::kSynthetic) {
    const auto& s = cfg.data.synthetic;
    out << YAML::Key << "kind" << YAML::Value << "synthetic";
    out << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "num_classes" << YAML::Value << s.num_classes;
    out << YAML::Key << "dim" << YAML::Value << s.dim;
    out << YAML::Key << "train_count" << YAML::Value << s.train_count;
    out << YAML::Key << "test_count" << YAML::Value << s.test_count;
    out << YAML::Key << "center_scale" << YAML::Value << io::format_exact(s.center_scale);
    out << YAML::Key << "spread" << YAML::Value << io::format_exact(s.spread);
    out << YAML::Key << "seed" << YAML::Value << s.seed;
    out << YAML::EndMap;
  } else {
    out << YAML::Key << "kind" << YAML::Value << "idx";
    out << YAML::Key << "train_images" << YAML::Value << cfg.data.train_images.string();
    out << YAML::Key << "train_labels" << YAML::Value << cfg.data.train_labels.string();
    out << YAML::Key << "test_images" << YAML::Value << cfg.data.test_images.string();
    out << YAML::Key << "test_labels" << YAML::Value << cfg.data.test_labels.string();
  }
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------- evaluation

double evaluate(const model::ModelSnapshot& model, const LabeledDataset& test) {
  require(!test.empty(), "evaluate: empty test set");
  require(test.input_dim() == model.arch().input_dim(), "evaluate: input dim does not match arch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (model::predict(model, test.inputs[i].values()) == test.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------- simulator

Simulator::Simulator(SessionConfig cfg, const Clock& clock) : cfg_(std::move(cfg)), clock_(clock) {
  cfg_.validate();
  LabeledDataset train;
  if (cfg_.data.kind == DataSource::Kind::kSynthetic) {
    auto tt = make_synthetic(cfg_.data.synthetic);
    train = std::move(tt.train);
    test_ = std::move(tt.test);
  } else {
    train = load_idx(cfg_.data.train_images, cfg_.data.train_labels, cfg_.arch.num_classes());
    test_ = load_idx(cfg_.data.test_images, cfg_.data.test_labels, cfg_.arch.num_classes());
    require(train.input_dim() == cfg_.arch.input_dim(), "session: IDX image size does not match arch input dim");
  }
  shards_ = partition(train, cfg_.partition);
  for (ClientId c : cfg_.faults.client_ids) {
    shards_[c] = inject_label_noise(shards_[c], cfg_.faults.noise_rate, derive_seed(cfg_.faults.seed, {kNoiseSeed, c}));
  }
}

model::ModelSnapshot Simulator::initial_global() const {
  return model::init_model(cfg_.arch, derive_seed(cfg_.master_seed, {kInitSeed}));
}

std::vector<ClientId> Simulator::select_participants(RoundId round, const std::set<ClientId>& excluded) const {
  std::vector<ClientId> eligible;
  for (ClientId c = 0; c < shards_.size(); ++c)
    if (!excluded.count(c)) eligible.push_back(c);
  if (eligible.size() > cfg_.clients_per_round) {
    std::mt19937_64 rng(derive_seed(cfg_.master_seed, {kSelectSeed, round}));
    std::shuffle(eligible.begin(), eligible.end(), rng);
    eligible.resize(cfg_.clients_per_round);
  }
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

telemetry::RoundRecord Simulator::run_round(const model::ModelSnapshot& global, RoundId round_id,
                                            const std::vector<ClientId>& participants,
                                            const std::string& base_ref) const {
  require(!participants.empty(), "run_round: no participants");
  for (ClientId c : participants) require(c < shards_.size(), "run_round: unknown client " + std::to_string(c));

  std::vector<model::TrainOutcome> outcomes(participants.size());
  std::vector<model::TrainConfig> hyper(participants.size());
  std::vector<std::exception_ptr> errors(participants.size());
  auto train_one = [&](std::size_t i) {
    const ClientId c = participants[i];
    hyper[i] = cfg_.train_cfg;
    hyper[i].seed = derive_seed(cfg_.master_seed, {kTrainSeed, cfg_.train_cfg.seed, round_id, c});
    try {
      outcomes[i] = model::train_local(global, shards_[c], hyper[i], clock_);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(cfg_.workers, participants.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < participants.size(); ++i) train_one(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < participants.size(); i += workers) train_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < participants.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      fail(e.code(), "client " + std::to_string(participants[i]) + ": " + e.what());
    }
  }

  telemetry::RoundRecord rec;
  rec.round_id = round_id;
  rec.participant_ids = participants;
  rec.base_ref = base_ref;
  rec.weighting = cfg_.weighting;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const ClientId c = participants[i];
    ClientMetrics m;
    m.client_id = c;
    m.training_loss = outcomes[i].training_loss;
    m.response_time = outcomes[i].duration_seconds;
    m.dataset_size = shards_[c].size();
    m.hyperparams = hyper[i];
    rec.client_metrics[c] = m;
    rec.client_snapshots[c] = std::make_shared<const model::ModelSnapshot>(std::move(outcomes[i].model));
  }
  const double start = clock_.now_seconds();
  rec.global_snapshot = std::make_shared<const model::ModelSnapshot>(rec.aggregate_prefix(participants.size()));
  rec.aggregation_duration = std::max(0.0, clock_.now_seconds() - start);
  return rec;
}

model::ModelSnapshot Simulator::run_session(telemetry::RoundSink& sink, const RoundHooks& hooks) const {
  model::ModelSnapshot global = initial_global();
  std::string base_ref = "genesis";
  for (int r = 0; r < cfg_.num_rounds; ++r) {
    const auto round = static_cast<RoundId>(r);
    telemetry::RoundRecord rec = run_round(global, round, select_participants(round), base_ref);
    if (hooks.before_commit) hooks.before_commit(round);
    try {
      sink.record_round(rec);
    } catch (const Error& e) {
      fail(e.code(), "round " + std::to_string(round) + ": telemetry write failed: " + e.what());
    }
    if (hooks.after_commit) hooks.after_commit(rec);
    global = *rec.global_snapshot;
    base_ref = telemetry::main_ref(round);
  }
  return global;
}

}  // namespace fldebug::fl
