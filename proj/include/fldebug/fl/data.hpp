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
#include <filesystem>

#include "fldebug/dataset.hpp"

namespace fldebug::fl {

/// Seeded Gaussian class blobs: class centers ~ N(0, center_scale^2) per
/// dimension, samples = center + N(0, spread^2).
struct SyntheticSpec {
  std::size_t num_classes = 10;
  std::size_t dim = 64;
  std::size_t train_count = 2000;
  std::size_t test_count = 500;
  double center_scale = 1.0;
  double spread = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainTest {
  LabeledDataset train;
  LabeledDataset test;
};

/// Labels are balanced: example i gets class i % num_classes before the
/// joint shuffle.
TrainTest make_synthetic(const SyntheticSpec& spec);

/// IDX (MNIST family) import: images (magic 0x00000803) scaled to [0,1] and
/// flattened, labels (magic 0x00000801). num_classes = max label + 1 unless
/// given.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes = 0);

}  // namespace fldebug::fl
