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
#include <fstream>
#include <thread>

#include <gtest/gtest.h>

#include "fldebug/error.hpp"
#include "fldebug/experiments.hpp"
#include "fldebug/fl/fedavg.hpp"
#include "fldebug/telemetry/store.hpp"
#include "test_util.hpp"

namespace fldebug::telemetry {
namespace {

using fldebug::testing::TempDir;

fl::SessionConfig tiny_config(int rounds = 3) {
  experiments::ScenarioSpec spec;
  spec.rounds = rounds;
  spec.epochs = 1;
  spec.num_clients = 5;
  spec.faulty = {};
  spec.arch = model::ModelArch{{64, 16, 10}};
  return experiments::scenario_config(spec);
}

std::vector<RoundRecord> simulate(const fl::Simulator& sim) {
  experiments::MemorySink sink;
  sim.run_session(sink);
  return sink.rounds;
}

void flip_byte(const std::filesystem::path& path, std::size_t offset) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0x40);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(&c, 1);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

class StoreTest : public ::testing::Test {
 protected:
  StoreTest() : sim_(tiny_config(), clock_), rounds_(simulate(sim_)) {}

  TelemetryStore fresh() { return TelemetryStore::create(dir_ / "store", sim_.initial_global(), "note: test\n"); }

  FrozenClock clock_;
  TempDir dir_{"store"};
  fl::Simulator sim_;
  std::vector<RoundRecord> rounds_;
};

TEST_F(StoreTest, RoundTripBitExact) {
  auto store = fresh();
  for (const auto& r : rounds_) EXPECT_EQ(store.record_round(r), r.round_id);
  const auto reopened = TelemetryStore::open(dir_ / "store");
  ASSERT_EQ(reopened.latest_round(), RoundId{2});
  for (const auto& r : rounds_) {
    EXPECT_TRUE(reopened.load_round(r.round_id)->bit_equal(r));
    EXPECT_TRUE(reopened.read_round_uncached(r.round_id).bit_equal(r));
  }
  EXPECT_TRUE(reopened.genesis().bit_equal(sim_.initial_global()));
  EXPECT_EQ(reopened.metadata_yaml(), "note: test\n");
  EXPECT_EQ(reopened.arch(), sim_.config().arch);
}

TEST_F(StoreTest, EmptyStore) {
  auto store = fresh();
  EXPECT_FALSE(store.latest_round().has_value());
  EXPECT_EQ(store.round_count(), 0u);
  EXPECT_TRUE(store.verify_integrity().ok());
  EXPECT_EQ(code_of([&] { store.load_round(0); }), ErrorCode::kNotFound);
}

TEST_F(StoreTest, GapAndReplayRejected) {
  auto store = fresh();
  store.record_round(rounds_[0]);
  EXPECT_EQ(code_of([&] { store.record_round(rounds_[2]); }), ErrorCode::kConflict);
  EXPECT_EQ(code_of([&] { store.record_round(rounds_[0]); }), ErrorCode::kConflict);
  EXPECT_EQ(store.round_count(), 1u);
  EXPECT_FALSE(std::filesystem::exists(dir_ / "store" / "rounds" / "000002"));
  store.record_round(rounds_[1]);
  EXPECT_EQ(store.latest_round(), RoundId{1});
}

TEST_F(StoreTest, FirstRoundMustBeZero) {
  auto store = fresh();
  EXPECT_EQ(code_of([&] { store.record_round(rounds_[1]); }), ErrorCode::kConflict);
}

TEST_F(StoreTest, InconsistentRecordRejected) {
  auto store = fresh();
  RoundRecord bad = rounds_[0];
  bad.client_metrics.erase(bad.participant_ids.front());
  EXPECT_THROW(store.record_round(bad), Error);
  EXPECT_EQ(store.round_count(), 0u);
}

TEST_F(StoreTest, CreateTwiceConflicts) {
  fresh();
  EXPECT_EQ(code_of([&] { fresh(); }), ErrorCode::kConflict);
  EXPECT_THROW(TelemetryStore::open(dir_ / "missing"), Error);
}

TEST_F(StoreTest, IntegrityPassesOnSessionStore) {
  auto cfg = tiny_config(5);
  const fl::Simulator sim(cfg);
  auto store = TelemetryStore::create(dir_ / "five", sim.initial_global());
  sim.run_session(store);
  const auto report = store.verify_integrity();
  EXPECT_TRUE(report.ok()) << (report.messages.empty() ? "" : report.messages.front());
  EXPECT_EQ(report.rounds_checked, 5u);
}

TEST_F(StoreTest, GlobalByteFlipFlagsThatRound) {
  auto store = fresh();
  for (const auto& r : rounds_) store.record_round(r);
  flip_byte(dir_ / "store" / "rounds" / "000001" / "global.bin", 37);
  const auto report = TelemetryStore::open(dir_ / "store").verify_integrity();
  EXPECT_FALSE(report.ok());
  EXPECT_EQ(report.failed_rounds, (std::vector<RoundId>{1}));
  EXPECT_EQ(report.first_divergence(), RoundId{1});
}

TEST_F(StoreTest, ClientByteFlipFlagsThatRound) {
  auto store = fresh();
  for (const auto& r : rounds_) store.record_round(r);
  flip_byte(dir_ / "store" / "rounds" / "000002" / "client-000003.bin", 101);
  const auto report = TelemetryStore::open(dir_ / "store").verify_integrity();
  EXPECT_EQ(report.failed_rounds, (std::vector<RoundId>{2}));
}

TEST_F(StoreTest, TruncatedBlobReported) {
  auto store = fresh();
  for (const auto& r : rounds_) store.record_round(r);
  std::filesystem::resize_file(dir_ / "store" / "rounds" / "000000" / "global.bin", 10);
  const auto reopened = TelemetryStore::open(dir_ / "store");
  EXPECT_EQ(code_of([&] { reopened.read_round_uncached(0); }), ErrorCode::kDataLoss);
  EXPECT_EQ(reopened.verify_integrity().failed_rounds, (std::vector<RoundId>{0}));
}

TEST_F(StoreTest, StoredGlobalIsRederivable) {
  auto store = fresh();
  for (const auto& r : rounds_) store.record_round(r);
  for (const auto& r : rounds_) {
    const auto rec = store.read_round_uncached(r.round_id);
    std::vector<model::ModelSnapshot> snaps;
    std::vector<double> weights;
    for (ClientId c : rec.participant_ids) {
      snaps.push_back(*rec.client_snapshots.at(c));
      weights.push_back(static_cast<double>(rec.client_metrics.at(c).dataset_size));
    }
    EXPECT_TRUE(fl::fedavg(snaps, weights).bit_equal(*rec.global_snapshot));
  }
}

TEST_F(StoreTest, IncompleteTempDirIsInvisible) {
  auto store = fresh();
  store.record_round(rounds_[0]);
  std::filesystem::create_directories(dir_ / "store" / "rounds" / "000001.tmp");
  const auto reopened = TelemetryStore::open(dir_ / "store");
  EXPECT_EQ(reopened.latest_round(), RoundId{0});
  EXPECT_FALSE(reopened.has_round(1));
  store.record_round(rounds_[1]);
  EXPECT_EQ(reopened.latest_round(), RoundId{1});
}

TEST_F(StoreTest, ReadersSeeCommittedRoundsWhileWriting) {
  auto cfg = tiny_config(8);
  const fl::Simulator sim(cfg, clock_);
  const auto records = simulate(sim);
  auto writer = TelemetryStore::create(dir_ / "rw", sim.initial_global());
  const auto reader = TelemetryStore::open(dir_ / "rw");
  std::atomic<bool> done{false};
  std::atomic<int> mismatches{0}, reads{0};
  std::thread t([&] {
    while (!done) {
      const auto latest = reader.latest_round();
      if (!latest) continue;
      for (RoundId r = 0; r <= *latest; ++r) {
        if (!reader.read_round_uncached(r).bit_equal(records[r])) ++mismatches;
        ++reads;
      }
    }
  });
  for (const auto& r : records) writer.record_round(r);
  done = true;
  t.join();
  EXPECT_EQ(mismatches.load(), 0);
  EXPECT_EQ(reader.latest_round(), RoundId{7});
}

TEST_F(StoreTest, BranchesAndHead) {
  auto store = fresh();
  for (const auto& r : rounds_) store.record_round(r);
  EXPECT_EQ(store.head(), "main");
  auto branch = store.create_branch("fix-1", 1);
  EXPECT_TRUE(branch.is_branch());
  EXPECT_EQ(branch.timeline(), "fix-1");
  EXPECT_EQ(branch.first_round(), 1u);
  EXPECT_FALSE(branch.latest_round().has_value());

  RoundRecord r1 = rounds_[1];
  r1.base_ref = main_ref(0);
  branch.record_round(r1);
  RoundRecord r2 = rounds_[2];
  r2.base_ref = branch_ref("fix-1", 1);
  branch.record_round(r2);
  EXPECT_EQ(code_of([&] { branch.record_round(rounds_[0]); }), ErrorCode::kConflict);
  EXPECT_TRUE(branch.verify_integrity().ok());
  EXPECT_TRUE(store.resolve("main:0")->bit_equal(*rounds_[0].global_snapshot));
  EXPECT_TRUE(store.resolve("branch:fix-1:2")->bit_equal(*rounds_[2].global_snapshot));
  EXPECT_TRUE(store.resolve("genesis")->bit_equal(sim_.initial_global()));
  EXPECT_TRUE(branch.incoming_global(r2)->bit_equal(*rounds_[1].global_snapshot));
  EXPECT_THROW(store.resolve("nonsense"), Error);

  EXPECT_EQ(store.branches(), (std::vector<std::string>{"fix-1"}));
  store.set_head("fix-1");
  EXPECT_EQ(TelemetryStore::open(dir_ / "store").head(), "fix-1");
  EXPECT_EQ(code_of([&] { store.set_head("nope"); }), ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { store.create_branch("fix-1", 0); }), ErrorCode::kConflict);
  EXPECT_EQ(code_of([&] { store.create_branch("bad name", 0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { store.create_branch("main", 0); }), ErrorCode::kInvalidArgument);

  for (const auto& r : rounds_) EXPECT_TRUE(store.read_round_uncached(r.round_id).bit_equal(r));
}

TEST_F(StoreTest, OnDiskLayout) {
  auto store = fresh();
  store.record_round(rounds_[0]);
  const auto root = dir_ / "store";
  EXPECT_TRUE(std::filesystem::exists(root / "store.yaml"));
  EXPECT_TRUE(std::filesystem::exists(root / "genesis.bin"));
  EXPECT_TRUE(std::filesystem::exists(root / "HEAD"));
  EXPECT_TRUE(std::filesystem::exists(root / "rounds" / "000000" / "manifest.yaml"));
  EXPECT_TRUE(std::filesystem::exists(root / "rounds" / "000000" / "global.bin"));
  for (ClientId c : rounds_[0].participant_ids) {
    char name[32];
    std::snprintf(name, sizeof(name), "client-%06u.bin", c);
    EXPECT_EQ(std::filesystem::file_size(root / "rounds" / "000000" / name), sim_.config().arch.param_count() * 4);
  }
}

TEST(RecordTest, AggregatePrefixMatchesFedavgOfPrefix) {
  const FrozenClock clock;
  const fl::Simulator sim(tiny_config(1), clock);
  const auto rec = sim.run_round(sim.initial_global(), 0, {0, 1, 2, 3, 4}, "genesis");
  for (std::size_t k = 1; k <= 5; ++k) {
    std::vector<model::ModelSnapshot> snaps;
    std::vector<double> w;
    for (std::size_t i = 0; i < k; ++i) {
      const ClientId c = rec.participant_ids[i];
      snaps.push_back(*rec.client_snapshots.at(c));
      w.push_back(static_cast<double>(rec.client_metrics.at(c).dataset_size));
    }
    EXPECT_TRUE(rec.aggregate_prefix(k).bit_equal(fl::fedavg(snaps, w)));
  }
  EXPECT_THROW(rec.aggregate_prefix(0), Error);
  EXPECT_THROW(rec.aggregate_prefix(6), Error);
}

TEST(RecordTest, UniformWeighting) {
  const FrozenClock clock;
  auto cfg = tiny_config(1);
  cfg.weighting = Weighting::kUniform;
  cfg.partition.mode = fl::PartitionMode::kNonIidQuantity;
  const fl::Simulator sim(cfg, clock);
  const auto rec = sim.run_round(sim.initial_global(), 0, {0, 1, 2}, "genesis");
  EXPECT_EQ(rec.aggregation_weights(), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(parse_weighting(to_string(Weighting::kUniform)), Weighting::kUniform);
}

}  // namespace
}  // namespace fldebug::telemetry
