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

#include "fldebug/faultloc/localization.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>

#include "fldebug/digest.hpp"
#include "fldebug/error.hpp"
#include "fldebug/seed.hpp"

namespace fldebug::faultloc {

void LocalizationConfig::validate() const {
  require(!std::isnan(activation_threshold) && activation_threshold >= 0.0f,
          "localization: activation threshold must be >= 0");
}

// ------------------------------------------------------------------- cache

const model::ActivationProfile* ProfileCache::find(const std::string& model_digest, const std::string& input_digest,
                                                   float threshold) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find({model_digest, input_digest, std::bit_cast<std::uint32_t>(threshold)});
  return it == entries_.end() ? nullptr : &it->second;
}

void ProfileCache::insert(const std::string& model_digest, const std::string& input_digest, float threshold,
                          model::ActivationProfile profile) {
  std::lock_guard lock(mu_);
  entries_.emplace(Key{model_digest, input_digest, std::bit_cast<std::uint32_t>(threshold)}, std::move(profile));
}

std::size_t ProfileCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------- profiles

std::vector<model::ActivationProfile> activation_sets(std::span<const ClientModel> clients, const model::Tensor& input,
                                                      float threshold, ProfileCache* cache,
                                                      std::size_t* forward_passes) {
  for (const auto& c : clients) {
    require(c.snapshot != nullptr, "activation_sets: client without snapshot");
    require(c.snapshot->comparable_with(*clients.front().snapshot), "activation_sets: clients have different architectures");
  }
  std::vector<model::ActivationProfile> out;
  out.reserve(clients.size());
  const std::string input_digest = cache ? sha256_hex_of(input.values()) : std::string();
  for (const auto& c : clients) {
    std::string model_digest;
    if (cache) {
      model_digest = c.snapshot->digest();
      if (const auto* hit = cache->find(model_digest, input_digest, threshold)) {
        out.push_back(*hit);
        continue;
      }
    }
    auto result = model::forward(*c.snapshot, input, threshold);
    if (forward_passes) ++*forward_passes;
    if (cache) cache->insert(model_digest, input_digest, threshold, result.profile);
    out.push_back(std::move(result.profile));
  }
  return out;
}

std::size_t common_activation_count(std::span<const model::ActivationProfile* const> profiles) {
  if (profiles.empty()) return 0;
  std::vector<model::NeuronId> common = profiles.front()->active;
  std::vector<model::NeuronId> next;
  for (std::size_t i = 1; i < profiles.size() && !common.empty(); ++i) {
    next.clear();
    std::set_intersection(common.begin(), common.end(), profiles[i]->active.begin(), profiles[i]->active.end(),
                          std::back_inserter(next));
    common.swap(next);
  }
  return common.size();
}

// ------------------------------------------------------------ localization

InputLocalization localize_on_input(std::span<const ClientModel> clients, const model::Tensor& input,
                                    const LocalizationConfig& cfg, ProfileCache* cache) {
  cfg.validate();
  if (clients.size() < 3) {
    fail(ErrorCode::kInvalidArgument,
         "localize: need at least 3 clients; with 2 every leave-one-out subset is a single client");
  }
  std::vector<ClientModel> sorted(clients.begin(), clients.end());
  std::sort(sorted.begin(), sorted.end(), [](const ClientModel& a, const ClientModel& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    require(sorted[i].id != sorted[i - 1].id, "localize: duplicate client id " + std::to_string(sorted[i].id));

  InputLocalization out;
  const auto profiles = activation_sets(sorted, input, cfg.activation_threshold, cache, &out.forward_passes);

  // A neuron is common to "everyone but e" iff it is active in all n clients,
  // or in exactly n-1 clients and e is the one missing it.
  std::map<model::NeuronId, std::size_t> counts;
  for (const auto& p : profiles)
    for (const auto& id : p.active) ++counts[id];
  const std::size_t n = sorted.size();
  std::size_t active_in_all = 0;
  std::vector<std::size_t> missing_only_in(n, 0);
  for (const auto& [id, count] : counts) {
    if (count == n) {
      ++active_in_all;
    } else if (count == n - 1) {
      for (std::size_t e = 0; e < n; ++e) {
        if (!profiles[e].contains(id)) {
          ++missing_only_in[e];
          break;
        }
      }
    }
  }

  long long best = -1;
  std::size_t best_index = 0;
  out.subset_common.resize(n);
  out.excluded_order.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t common = active_in_all + missing_only_in[e];
    out.subset_common[e] = common;
    out.excluded_order[e] = sorted[e].id;
    if (static_cast<long long>(common) > best) {
      best = static_cast<long long>(common);
      best_index = e;
    }
  }
  out.accused = sorted[best_index].id;
  out.max_common_activations = static_cast<std::size_t>(best);
  out.tie = std::count(out.subset_common.begin(), out.subset_common.end(), out.max_common_activations) > 1;
  return out;
}

ClientId majority_verdict(std::span<const InputVerdict> verdicts) {
  require(!verdicts.empty(), "majority_verdict: no verdicts");
  std::map<ClientId, std::size_t> votes;
  for (const auto& v : verdicts) ++votes[v.accused];
  ClientId best = votes.begin()->first;
  std::size_t best_votes = 0;
  for (const auto& [id, n] : votes) {
    if (n > best_votes) {
      best = id;
      best_votes = n;
    }
  }
  return best;
}

FaultReport localize(std::span<const ClientModel> clients, const TestSuite& suite, const LocalizationConfig& cfg,
                     const std::set<ClientId>& truth, ProfileCache* cache) {
  require(!suite.empty(), "localize: empty test suite");
  const auto start = std::chrono::steady_clock::now();
  FaultReport report;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < suite.entries.size(); ++i) {
    const auto r = localize_on_input(clients, suite.entries[i].input, cfg, cache);
    report.per_input.push_back({i, r.accused, r.max_common_activations, r.tie});
    report.forward_passes += r.forward_passes;
    if (truth.count(r.accused)) ++correct;
  }
  report.verdict = majority_verdict(report.per_input);
  if (!truth.empty())
    report.accuracy_vs_truth = static_cast<double>(correct) / static_cast<double>(suite.entries.size());
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

MultiFaultResult localize_multi(std::span<const ClientModel> clients, const SelectionConfig& selection,
                                const LocalizationConfig& cfg, std::size_t num_faults) {
  require(num_faults >= 1, "localize_multi: number of faults must be >= 1");
  MultiFaultResult out;
  std::vector<ClientModel> remaining(clients.begin(), clients.end());
  for (std::size_t iter = 0; iter < num_faults; ++iter) {
    if (remaining.size() < 3) {
      out.partial = true;
      out.note = "stopped after " + std::to_string(iter) + " iterations: fewer than 3 clients remain";
      break;
    }
    SelectionConfig sel = selection;
    sel.seed = derive_seed(selection.seed, {iter});
    if (sel.eta) sel.eta = std::min(*sel.eta, remaining.size());
    TestSuite suite;
    try {
      suite = select_test_inputs(remaining, sel);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kFailedPrecondition) throw;
      out.partial = true;
      out.note = "stopped after " + std::to_string(iter) + " iterations: " + e.what();
      break;
    }
    FaultReport report = localize(remaining, suite, cfg);
    out.accused.push_back(report.verdict);
    remaining.erase(std::remove_if(remaining.begin(), remaining.end(),
                                   [&](const ClientModel& c) { return c.id == report.verdict; }),
                    remaining.end());
    out.iterations.push_back(std::move(report));
  }
  return out;
}

std::vector<ThresholdPoint> threshold_sweep(std::span<const ClientModel> clients, const TestSuite& suite,
                                            std::span<const float> thresholds, const std::set<ClientId>& truth) {
  std::vector<ThresholdPoint> out;
  for (float t : thresholds) {
    LocalizationConfig cfg;
    cfg.activation_threshold = t;
    const FaultReport report = localize(clients, suite, cfg, truth);
    ThresholdPoint p;
    p.threshold = t;
    p.accuracy = report.accuracy_vs_truth.value_or(0.0);
    p.ties = static_cast<std::size_t>(std::count_if(report.per_input.begin(), report.per_input.end(),
                                                    [](const InputVerdict& v) { return v.tie; }));
    p.verdict = report.verdict;
    out.push_back(p);
  }
  return out;
}

}  // namespace fldebug::faultloc
