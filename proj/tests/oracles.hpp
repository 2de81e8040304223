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

#include <algorithm>
#include <iterator>
#include <set>
#include <utility>
#include <vector>

#include "fldebug/faultloc/selection.hpp"
#include "test_util.hpp"

namespace fldebug::testing {

// Activated neuron ids from the scalar reference network.
inline std::set<std::pair<std::size_t, std::size_t>> reference_profile(const model::ModelSnapshot& m, const model::Tensor& x,
                                                                float threshold) {
  const ReferenceMlp ref{m.arch().layer_sizes};
  const auto acts = ref.layers(to_double(m.params()), to_double(x.values()));
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t l = 1; l + 1 < acts.size(); ++l)
    for (std::size_t i = 0; i < acts[l].size(); ++i)
      if (static_cast<float>(acts[l][i]) > threshold) out.insert({l - 1, i});
  return out;
}

inline std::size_t reference_predict(const model::ModelSnapshot& m, const model::Tensor& x) {
  const ReferenceMlp ref{m.arch().layer_sizes};
  const auto logits = ref.layers(to_double(m.params()), to_double(x.values())).back();
  std::vector<float> f(logits.begin(), logits.end());
  return static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
}

struct OracleResult {
  ClientId accused = 0;
  std::size_t max_common = 0;
  bool tie = false;
};

// Materializes every leave-one-out subset and intersects its profiles from scratch.
inline OracleResult brute_force_localize(const std::vector<faultloc::ClientModel>& clients, const model::Tensor& x, float threshold) {
  std::vector<faultloc::ClientModel> sorted = clients;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  OracleResult best;
  bool first = true;
  for (std::size_t excluded = 0; excluded < sorted.size(); ++excluded) {
    std::vector<faultloc::ClientModel> subset;
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (i != excluded) subset.push_back(sorted[i]);
    auto common = reference_profile(*subset[0].snapshot, x, threshold);
    for (std::size_t i = 1; i < subset.size(); ++i) {
      const auto p = reference_profile(*subset[i].snapshot, x, threshold);
      std::set<std::pair<std::size_t, std::size_t>> next;
      std::set_intersection(common.begin(), common.end(), p.begin(), p.end(), std::inserter(next, next.begin()));
      common = std::move(next);
    }
    if (first || common.size() > best.max_common) {
      best = {sorted[excluded].id, common.size(), false};
      first = false;
    } else if (common.size() == best.max_common) {
      best.tie = true;
    }
  }
  return best;
}

}  // namespace fldebug::testing
