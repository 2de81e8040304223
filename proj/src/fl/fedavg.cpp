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

#include "fldebug/fl/fedavg.hpp"

#include <cmath>

#include "fldebug/error.hpp"

namespace fldebug::fl {

model::ModelSnapshot fedavg(std::span<const model::ModelSnapshot* const> snapshots,
                            std::span<const double> weights) {
  require(!snapshots.empty(), "fedavg: no snapshots");
  require(snapshots.size() == weights.size(), "fedavg: one weight per snapshot required");
  const model::ModelArch& arch = snapshots.front()->arch();
  double total = 0.0;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    require(snapshots[i]->arch() == arch, "fedavg: architecture mismatch at snapshot " + std::to_string(i));
    require(weights[i] > 0.0 && std::isfinite(weights[i]), "fedavg: weights must be positive");
    total += weights[i];
  }
  std::vector<double> acc(arch.param_count(), 0.0);
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto p = snapshots[i]->params();
    const double w = weights[i];
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * static_cast<double>(p[k]);
  }
  std::vector<float> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] / total);
  return model::ModelSnapshot(arch, std::move(out));
}

model::ModelSnapshot fedavg(std::span<const model::ModelSnapshot> snapshots, std::span<const double> weights) {
  std::vector<const model::ModelSnapshot*> ptrs;
  ptrs.reserve(snapshots.size());
  for (const auto& s : snapshots) ptrs.push_back(&s);
  return fedavg(ptrs, weights);
}

}  // namespace fldebug::fl
