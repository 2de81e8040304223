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
#include <vector>

#include "fldebug/model/tensor.hpp"

namespace fldebug {

/// Inputs with integer class labels. All inputs share one shape.
struct LabeledDataset {
  std::vector<model::Tensor> inputs;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t input_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

  /// Throws kInvalidArgument when the invariants do not hold.
  void validate() const;

  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

}  // namespace fldebug
