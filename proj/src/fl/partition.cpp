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

#include "fldebug/fl/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fldebug/error.hpp"
#include "fldebug/seed.hpp"

namespace fldebug::fl {

std::string to_string(PartitionMode mode) {
  return mode == PartitionMode::kIid ? "iid" : "noniid";
}

PartitionMode parse_partition_mode(const std::string& text) {
  if (text == "iid" || text == "IID") return PartitionMode::kIid;
  if (text == "noniid" || text == "non-iid" || text == "NONIID_QUANTITY") return PartitionMode::kNonIidQuantity;
  fail(ErrorCode::kInvalidArgument, "unknown partition mode '" + text + "'");
}

void PartitionPlan::validate() const {
  require(num_clients >= 2, "partition: num_clients must be >= 2");
  if (mode == PartitionMode::kNonIidQuantity)
    require(min_fraction > 0.0 && min_fraction <= 1.0, "partition: min_fraction must be in (0, 1]");
}

namespace {

std::vector<std::size_t> iid_sizes(std::size_t n, std::size_t k) {
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

// Every shard gets the guaranteed floor; the rest is split in proportion to
// uniform random weights with largest-remainder rounding.
std::vector<std::size_t> quantity_skew_sizes(std::size_t n, std::size_t k, double min_fraction,
                                             std::mt19937_64& rng) {
  const auto floor_size = static_cast<std::size_t>(std::ceil(min_fraction * static_cast<double>(n) / static_cast<double>(k)));
  std::vector<std::size_t> sizes(k, std::min(floor_size, n / k));
  std::size_t remaining = n - sizes[0] * k;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> w(k);
  double total = 0.0;
  for (double& v : w) total += (v = unit(rng) + 1e-12);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double share = static_cast<double>(remaining) * w[i] / total;
    const auto whole = static_cast<std::size_t>(std::floor(share));
    sizes[i] += whole;
    assigned += whole;
    remainders.emplace_back(share - static_cast<double>(whole), i);
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (std::size_t j = 0; assigned < remaining; ++j, ++assigned) ++sizes[remainders[j % k].second];
  return sizes;
}

}  // namespace

std::vector<std::vector<std::size_t>> partition_indices(std::size_t dataset_size, const PartitionPlan& plan) {
  plan.validate();
  if (dataset_size < plan.num_clients)
    fail(ErrorCode::kInvalidArgument, "partition: dataset has " + std::to_string(dataset_size) +
                                          " examples for " + std::to_string(plan.num_clients) + " clients");
  std::mt19937_64 rng(plan.seed);
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const auto sizes = plan.mode == PartitionMode::kIid
                         ? iid_sizes(dataset_size, plan.num_clients)
                         : quantity_skew_sizes(dataset_size, plan.num_clients, plan.min_fraction, rng);
  std::vector<std::vector<std::size_t>> shards(plan.num_clients);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < plan.num_clients; ++c) {
    shards[c].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                     order.begin() + static_cast<std::ptrdiff_t>(pos + sizes[c]));
    std::sort(shards[c].begin(), shards[c].end());
    pos += sizes[c];
  }
  return shards;
}

std::vector<LabeledDataset> partition(const LabeledDataset& dataset, const PartitionPlan& plan) {
  std::vector<LabeledDataset> out;
  for (const auto& idx : partition_indices(dataset.size(), plan)) out.push_back(dataset.subset(idx));
  return out;
}

LabeledDataset inject_label_noise(const LabeledDataset& shard, double noise_rate, std::uint64_t seed) {
  require(noise_rate >= 0.0 && noise_rate <= 1.0, "noise_rate must be in [0, 1]");
  require(shard.num_classes >= 2, "label noise needs at least 2 classes");
  LabeledDataset out = shard;
  const auto changes = static_cast<std::size_t>(std::llround(noise_rate * static_cast<double>(shard.size())));
  if (changes == 0) return out;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<std::size_t> other(0, shard.num_classes - 2);
  for (std::size_t j = 0; j < changes; ++j) {
    std::size_t& label = out.labels[order[j]];
    const std::size_t pick = other(rng);
    label = pick >= label ? pick + 1 : pick;
  }
  return out;
}

}  // namespace fldebug::fl
