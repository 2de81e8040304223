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

#include "fldebug/faultloc/selection.hpp"

#include <algorithm>
#include <set>

#include "fldebug/error.hpp"
#include "fldebug/seed.hpp"

namespace fldebug::faultloc {

std::vector<ClientModel> clients_of(const telemetry::RoundRecord& record) {
  std::vector<ClientModel> out;
  out.reserve(record.participant_ids.size());
  for (ClientId c : record.participant_ids) out.push_back({c, record.client_snapshots.at(c)});
  return out;
}

std::size_t SelectionConfig::resolved_eta(std::size_t num_clients) const {
  if (eta) return *eta;
  return std::min<std::size_t>(5, (num_clients + 1) / 2);
}

void SelectionConfig::validate(std::size_t num_clients) const {
  require(num_clients >= 2, "selection: need at least 2 clients");
  require(kappa >= 1, "selection: kappa must be >= 1");
  require(pool_batch >= 1, "selection: pool_batch must be >= 1");
  require(max_attempts >= 1, "selection: max_attempts must be >= 1");
  const std::size_t e = resolved_eta(num_clients);
  require(e >= 2, "selection: eta must be >= 2");
  require(e <= num_clients, "selection: eta (" + std::to_string(e) + ") exceeds number of clients (" +
                                std::to_string(num_clients) + ")");
}

std::vector<ClientId> same_prediction_clients(std::span<const ClientModel> clients,
                                              std::span<const std::size_t> predictions, std::size_t label) {
  std::vector<ClientId> out;
  for (std::size_t i = 0; i < clients.size(); ++i)
    if (predictions[i] == label) out.push_back(clients[i].id);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

void check_clients(std::span<const ClientModel> clients) {
  for (const auto& c : clients) require(c.snapshot != nullptr, "selection: client without snapshot");
  for (const auto& c : clients)
    require(c.snapshot->comparable_with(*clients.front().snapshot), "selection: clients have different architectures");
}

}  // namespace

TestSuite select_test_inputs(std::span<const ClientModel> clients, const SelectionConfig& cfg) {
  cfg.validate(clients.size());
  check_clients(clients);
  const model::ModelArch& arch = clients.front().snapshot->arch();
  model::InputShape shape = cfg.shape;
  if (shape.dims.empty()) shape.dims = {arch.input_dim()};
  shape.validate();
  require(shape.fan_in() == arch.input_dim(), "selection: input shape does not match model input dim");
  const std::size_t eta = cfg.resolved_eta(clients.size());
  const std::size_t num_classes = arch.num_classes();

  TestSuite suite;
  std::set<std::vector<ClientId>> seen;
  std::vector<std::pair<std::uint64_t, model::Tensor>> pool;
  std::size_t pool_pos = 0;
  std::vector<std::size_t> predictions(clients.size());

  auto refill = [&] {
    pool.clear();
    pool_pos = 0;
    for (std::size_t i = 0; i < cfg.pool_batch; ++i) {
      const std::uint64_t seed = derive_seed(cfg.seed, {suite.attempts + i});
      pool.emplace_back(seed, model::kaiming_random_input(shape, seed));
    }
  };
  refill();

  while (suite.entries.size() < cfg.kappa) {
    if (suite.attempts >= cfg.max_attempts) {
      suite.partial = true;
      suite.warning = "selected " + std::to_string(suite.entries.size()) + " of " + std::to_string(cfg.kappa) +
                      " inputs within " + std::to_string(cfg.max_attempts) + " attempts";
      break;
    }
    auto& [seed, input] = pool[pool_pos++];
    const std::size_t attempt = suite.attempts++;
    for (std::size_t i = 0; i < clients.size(); ++i) predictions[i] = model::predict(*clients[i].snapshot, input.values());
    for (std::size_t label = 0; label < num_classes; ++label) {
      auto agreeing = same_prediction_clients(clients, predictions, label);
      if (agreeing.size() >= eta && !seen.count(agreeing)) {
        seen.insert(agreeing);
        suite.entries.push_back({std::move(input), seed, attempt, label, std::move(agreeing)});
        break;
      }
    }
    if (pool_pos >= pool.size()) refill();
  }
  if (suite.entries.empty()) {
    fail(ErrorCode::kFailedPrecondition, "no discriminating inputs found after " + std::to_string(suite.attempts) +
                                             " attempts (eta " + std::to_string(eta) + ")");
  }
  return suite;
}

}  // namespace fldebug::faultloc
