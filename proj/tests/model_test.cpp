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

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fldebug/error.hpp"
#include "fldebug/model/mlp.hpp"
#include "fldebug/model/snapshot_io.hpp"
#include "test_util.hpp"

namespace fldebug::model {
namespace {

using fldebug::testing::ReferenceMlp;
using fldebug::testing::TempDir;

double sample_std(std::span<const float> v) {
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (float x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

TEST(ModelArchTest, ParseAndCounts) {
  const auto arch = ModelArch::parse("4,3,2");
  EXPECT_EQ(arch.layer_sizes, (std::vector<std::size_t>{4, 3, 2}));
  EXPECT_EQ(arch.param_count(), 4u * 3 + 3 + 3 * 2 + 2);
  EXPECT_EQ(arch.hidden_neuron_count(), 3u);
  EXPECT_EQ(arch.weight_offset(1), 15u);
  EXPECT_EQ(arch.to_string(), "4,3,2");
}

TEST(ModelArchTest, RejectsSingleLayer) {
  EXPECT_THROW(init_model(ModelArch{{4}}, 0), Error);
  EXPECT_THROW(ModelArch::parse("4,x,2"), Error);
}

TEST(InitModelTest, DeterministicPerSeed) {
  const ModelArch arch{{4, 3, 2}};
  EXPECT_TRUE(init_model(arch, 7).bit_equal(init_model(arch, 7)));
  EXPECT_FALSE(init_model(arch, 7).bit_equal(init_model(arch, 8)));
}

TEST(InitModelTest, BiasesAreZero) {
  const ModelArch arch{{4, 3, 2}};
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto m = init_model(arch, seed);
    for (std::size_t l = 0; l < arch.num_layers(); ++l)
      for (float b : m.bias(l)) EXPECT_EQ(b, 0.0f);
  }
}

TEST(InitModelTest, KaimingStd) {
  const ModelArch arch{{1000, 1000, 10}};
  const auto m = init_model(arch, 1);
  const double expected = std::sqrt(2.0 / 1000.0);
  EXPECT_NEAR(sample_std(m.weights(0)), expected, 0.05 * expected);
}

TEST(ForwardTest, ZeroModelIsSilent) {
  const ModelArch arch{{5, 4, 3, 3}};
  const auto m = ModelSnapshot::zeros(arch);
  std::mt19937_64 rng(3);
  const auto r = forward(m, fldebug::testing::random_tensor(5, rng), 0.003f);
  for (float z : r.logits.values()) EXPECT_EQ(z, 0.0f);
  EXPECT_EQ(r.predicted_label, 0u);
  EXPECT_TRUE(r.profile.active.empty());
}

TEST(ForwardTest, HandComputedTwoTwoTwo) {
  // W0=[[1,0],[0,1]], b0=[0,0], W1=[[1,1],[0,0]], b1=[0,0]
  const ModelSnapshot m(ModelArch{{2, 2, 2}}, {1, 0, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0});
  const Tensor x({2}, {0.5f, -0.5f});
  const auto r = forward(m, x, 0.003f);
  EXPECT_EQ(hidden_activations(m, x.values()), (std::vector<float>{0.5f, 0.0f}));
  ASSERT_EQ(r.profile.active.size(), 1u);
  EXPECT_EQ(r.profile.active[0], (NeuronId{0, 0}));
  EXPECT_EQ(r.logits.values()[0], 0.5f);
  EXPECT_EQ(r.logits.values()[1], 0.0f);
  EXPECT_EQ(r.predicted_label, 0u);

  const ReferenceMlp ref{{2, 2, 2}};
  const auto acts = ref.layers(fldebug::testing::to_double(m.params()), {0.5, -0.5});
  EXPECT_EQ(acts[1], (std::vector<double>{0.5, 0.0}));
  EXPECT_EQ(acts[2], (std::vector<double>{0.5, 0.0}));
}

TEST(ForwardTest, MatchesReferenceOnRandomModels) {
  std::mt19937_64 rng(11);
  const ModelArch arch{{6, 5, 4, 3}};
  const ReferenceMlp ref{arch.layer_sizes};
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = fldebug::testing::random_snapshot(arch, rng);
    const auto x = fldebug::testing::random_tensor(6, rng);
    const auto r = forward(m, x, 0.003f);
    const auto acts = ref.layers(fldebug::testing::to_double(m.params()), fldebug::testing::to_double(x.values()));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.logits.values()[i], acts[3][i], 1e-5);
    std::vector<NeuronId> expected;
    for (std::uint32_t l = 0; l < 2; ++l)
      for (std::uint32_t i = 0; i < acts[l + 1].size(); ++i)
        if (static_cast<float>(acts[l + 1][i]) > 0.003f) expected.push_back({l, i});
    EXPECT_EQ(r.profile.active, expected);
  }
}

TEST(ForwardTest, InfiniteThresholdGivesEmptyProfile) {
  std::mt19937_64 rng(5);
  const ModelArch arch{{8, 16, 4}};
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = fldebug::testing::random_snapshot(arch, rng);
    const auto r = forward(m, fldebug::testing::random_tensor(8, rng), std::numeric_limits<float>::infinity());
    EXPECT_TRUE(r.profile.active.empty());
  }
}

TEST(ForwardTest, ProfileMonotoneInThreshold) {
  std::mt19937_64 rng(6);
  const ModelArch arch{{8, 16, 12, 4}};
  const float thresholds[] = {0.0f, 0.003f, 0.01f, 0.1f, 0.5f, 1.0f, 2.0f};
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = fldebug::testing::random_snapshot(arch, rng);
    const auto x = fldebug::testing::random_tensor(8, rng);
    for (std::size_t i = 0; i + 1 < std::size(thresholds); ++i) {
      const auto lo = forward(m, x, thresholds[i]).profile;
      const auto hi = forward(m, x, thresholds[i + 1]).profile;
      EXPECT_TRUE(hi.is_subset_of(lo));
    }
  }
}

TEST(ForwardTest, Deterministic) {
  std::mt19937_64 rng(7);
  const auto m = fldebug::testing::random_snapshot(ModelArch{{8, 6, 3}}, rng);
  const auto x = fldebug::testing::random_tensor(8, rng);
  const auto a = forward(m, x);
  const auto b = forward(m, x);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.profile.active, b.profile.active);
}

TEST(ForwardTest, ShapeMismatchRejected) {
  const auto m = init_model(ModelArch{{4, 3, 2}}, 0);
  EXPECT_THROW(forward(m, Tensor({3}, {1, 2, 3})), Error);
}

TEST(ArgmaxTest, TiesGoToLowestIndex) {
  const std::vector<float> v{1.0f, 3.0f, 3.0f, 2.0f, 3.0f};
  EXPECT_EQ(argmax(v), 1u);
  const std::vector<float> flat(7, 0.25f);
  EXPECT_EQ(argmax(flat), 0u);
}

TEST(GradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2026);
  const std::vector<ModelArch> archs{ModelArch{{4, 3, 2}}, ModelArch{{5, 6, 4, 3}}, ModelArch{{3, 8, 5}}};
  std::size_t pairs = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const ModelArch& arch = archs[trial % archs.size()];
    const auto m = fldebug::testing::random_snapshot(arch, rng, 0.7);
    const auto x = fldebug::testing::random_tensor(arch.input_dim(), rng);
    const std::size_t label = rng() % arch.num_classes();
    const std::vector<Tensor> xs{x};
    const std::vector<std::size_t> ys{label};
    const auto lg = loss_and_gradient(m, xs, ys, 0.0);

    const ReferenceMlp ref{arch.layer_sizes};
    const auto xd = fldebug::testing::to_double(x.values());
    auto p = fldebug::testing::to_double(m.params());
    EXPECT_NEAR(lg.loss, ref.loss(p, xd, label), 1e-6 * std::max(1.0, lg.loss));
    double diff2 = 0.0, norm2 = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = ref.loss(p, xd, label);
      p[i] = saved - h;
      const double down = ref.loss(p, xd, label);
      p[i] = saved;
      const double fd = (up - down) / (2 * h);
      diff2 += (fd - lg.gradient[i]) * (fd - lg.gradient[i]);
      norm2 += std::max(fd * fd, lg.gradient[i] * lg.gradient[i]);
      EXPECT_LE(std::abs(fd - lg.gradient[i]), 1e-3 * std::max(std::abs(fd), 1e-3)) << "param " << i;
    }
    if (norm2 > 0) EXPECT_LE(std::sqrt(diff2 / norm2), 1e-3);
    ++pairs;
  }
  EXPECT_GE(pairs, 100u);
}

TEST(GradientTest, WeightDecayTerm) {
  std::mt19937_64 rng(4);
  const ModelArch arch{{3, 4, 2}};
  const auto m = fldebug::testing::random_snapshot(arch, rng);
  const std::vector<Tensor> xs{fldebug::testing::random_tensor(3, rng)};
  const std::vector<std::size_t> ys{1};
  const auto plain = loss_and_gradient(m, xs, ys, 0.0);
  const auto reg = loss_and_gradient(m, xs, ys, 0.1);
  double w2 = 0.0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l)
    for (float w : m.weights(l)) w2 += static_cast<double>(w) * w;
  EXPECT_NEAR(reg.loss - plain.loss, 0.05 * w2, 1e-9);
  const std::size_t w0 = arch.weight_offset(0);
  EXPECT_NEAR(reg.gradient[w0] - plain.gradient[w0], 0.1 * m.params()[w0], 1e-9);
  const std::size_t b0 = w0 + 12;
  EXPECT_DOUBLE_EQ(reg.gradient[b0], plain.gradient[b0]);
}

TEST(TrainLocalTest, SingleStepIsNegativeLrGradient) {
  std::mt19937_64 rng(9);
  const ModelArch arch{{4, 3, 2}};
  const auto m = fldebug::testing::random_snapshot(arch, rng, 0.5);
  LabeledDataset d;
  d.inputs = {fldebug::testing::random_tensor(4, rng)};
  d.labels = {1};
  d.num_classes = 2;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  const auto out = train_local(m, d, cfg);

  const ReferenceMlp ref{arch.layer_sizes};
  auto p = fldebug::testing::to_double(m.params());
  const auto xd = fldebug::testing::to_double(d.inputs[0].values());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + 1e-6;
    const double up = ref.loss(p, xd, 1);
    p[i] = saved - 1e-6;
    const double down = ref.loss(p, xd, 1);
    p[i] = saved;
    const double fd = (up - down) / 2e-6;
    const double delta = static_cast<double>(out.model.params()[i]) - m.params()[i];
    EXPECT_NEAR(delta, -cfg.learning_rate * fd, 1e-3 * std::abs(cfg.learning_rate * fd) + 1e-7) << "param " << i;
  }
}

TEST(TrainLocalTest, ZeroEpochsKeepsWeights) {
  const ModelArch arch{{4, 3, 2}};
  const auto m = init_model(arch, 3);
  std::mt19937_64 rng(1);
  LabeledDataset d;
  for (int i = 0; i < 5; ++i) {
    d.inputs.push_back(fldebug::testing::random_tensor(4, rng));
    d.labels.push_back(i % 2);
  }
  d.num_classes = 2;
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto out = train_local(m, d, cfg);
  EXPECT_TRUE(out.model.bit_equal(m));
  EXPECT_DOUBLE_EQ(out.training_loss, mean_cross_entropy(m, d));
}

TEST(TrainLocalTest, EmptyDatasetRejected) {
  LabeledDataset d;
  d.num_classes = 2;
  EXPECT_THROW(train_local(init_model(ModelArch{{4, 3, 2}}, 0), d, TrainConfig{}), Error);
}

TEST(TrainLocalTest, SeparableDataLossDecreasesAndIsDeterministic) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 0.3);
  LabeledDataset d;
  d.num_classes = 2;
  for (int i = 0; i < 200; ++i) {
    const std::size_t y = i % 2;
    const float c = y == 0 ? -1.0f : 1.0f;
    d.inputs.emplace_back(std::vector<std::size_t>{2},
                          std::vector<float>{c + static_cast<float>(noise(rng)), c + static_cast<float>(noise(rng))});
    d.labels.push_back(y);
  }
  const auto m = init_model(ModelArch{{2, 8, 2}}, 5);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.1;
  cfg.seed = 17;
  const auto a = train_local(m, d, cfg);
  const auto b = train_local(m, d, cfg);
  EXPECT_LT(mean_cross_entropy(a.model, d), mean_cross_entropy(m, d));
  EXPECT_TRUE(a.model.bit_equal(b.model));
  EXPECT_EQ(a.training_loss, b.training_loss);
  EXPECT_GE(a.training_loss, 0.0);
}

TEST(LossTest, NonNegative) {
  std::mt19937_64 rng(8);
  const ModelArch arch{{5, 7, 4}};
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = fldebug::testing::random_snapshot(arch, rng, 3.0);
    const std::vector<Tensor> xs{fldebug::testing::random_tensor(5, rng, 3.0)};
    const std::vector<std::size_t> ys{rng() % 4};
    EXPECT_GE(loss_and_gradient(m, xs, ys, 0.0).loss, 0.0);
  }
}

TEST(KaimingInputTest, DeterministicAndSized) {
  const InputShape shape{{32, 32, 3}};
  const auto a = kaiming_random_input(shape, 4);
  EXPECT_EQ(a.size(), 3072u);
  EXPECT_EQ(a, kaiming_random_input(shape, 4));
  EXPECT_FALSE(a == kaiming_random_input(shape, 5));
}

TEST(KaimingInputTest, PooledStd) {
  const InputShape shape{{10000}};
  std::vector<float> pooled;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto t = kaiming_random_input(shape, seed);
    pooled.insert(pooled.end(), t.values().begin(), t.values().end());
  }
  const double expected = std::sqrt(2.0 / 10000.0);
  EXPECT_NEAR(sample_std(pooled), expected, 0.05 * expected);
}

TEST(SnapshotIoTest, RoundTripBitExact) {
  TempDir dir("snap");
  std::mt19937_64 rng(10);
  auto m = fldebug::testing::random_snapshot(ModelArch{{6, 5, 3}}, rng);
  m.params()[0] = -0.0f;
  m.params()[1] = std::numeric_limits<float>::denorm_min();
  save_snapshot(m, dir / "model");
  EXPECT_TRUE(std::filesystem::exists(dir / "model.yaml"));
  EXPECT_EQ(std::filesystem::file_size(dir / "model.bin"), m.params().size() * 4);
  const auto back = load_snapshot(dir / "model");
  EXPECT_TRUE(back.bit_equal(m));
  EXPECT_EQ(back.digest(), m.digest());
}

TEST(SnapshotIoTest, LittleEndianLayout) {
  TempDir dir("snap");
  const ModelSnapshot m(ModelArch{{1, 1}}, {1.0f, -2.0f});
  save_snapshot(m, dir / "m");
  std::ifstream in(dir / "m.bin", std::ios::binary);
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  const unsigned char expected[8] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_TRUE(std::equal(bytes, bytes + 8, expected));
}

TEST(SnapshotIoTest, TruncatedBlobIsDataLoss) {
  TempDir dir("snap");
  save_snapshot(init_model(ModelArch{{4, 3, 2}}, 1), dir / "m");
  std::filesystem::resize_file(dir / "m.bin", 8);
  try {
    load_snapshot(dir / "m");
    FAIL() << "expected data loss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataLoss);
  }
}

TEST(DigestTest, DistinguishesNegativeZero) {
  const ModelSnapshot a(ModelArch{{1, 1}}, {0.0f, 1.0f});
  const ModelSnapshot b(ModelArch{{1, 1}}, {-0.0f, 1.0f});
  EXPECT_FALSE(a.bit_equal(b));
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
}

}  // namespace
}  // namespace fldebug::model
