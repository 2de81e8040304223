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

#include <span>
#include <vector>

#include "fldebug/model/mlp.hpp"

namespace fldebug::fl {

/// Weighted parameter average sum(w_i * p_i) / sum(w_i). Accumulates in
/// double in the given snapshot order, so equal inputs in equal order give
/// bit-identical output.
model::ModelSnapshot fedavg(std::span<const model::ModelSnapshot* const> snapshots,
                            std::span<const double> weights);

model::ModelSnapshot fedavg(std::span<const model::ModelSnapshot> snapshots,
                            std::span<const double> weights);

}  // namespace fldebug::fl
