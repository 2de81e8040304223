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

#include <cstddef>
#include <cstdint>

#include "fldebug/model/mlp.hpp"

namespace fldebug {

using ClientId = std::uint32_t;
using RoundId = std::uint64_t;

/// What a client reports to the aggregator after local training.
struct ClientMetrics {
  ClientId client_id = 0;
  double training_loss = 0.0;
  double response_time = 0.0;  // seconds
  std::size_t dataset_size = 0;
  model::TrainConfig hyperparams;

  friend bool operator==(const ClientMetrics&, const ClientMetrics&) = default;
};

}  // namespace fldebug
