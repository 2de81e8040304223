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

#include "fldebug/fl/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "fldebug/error.hpp"
#include "fldebug/seed.hpp"

namespace fldebug::fl {

void SyntheticSpec::validate() const {
  require(num_classes >= 2, "synthetic: need at least 2 classes");
  require(dim >= 1, "synthetic: dim must be positive");
  require(train_count >= 1, "synthetic: train_count must be positive");
  require(center_scale >= 0.0 && spread >= 0.0, "synthetic: scales must be non-negative");
}

namespace {

LabeledDataset sample_blobs(const std::vector<std::vector<double>>& centers, std::size_t count,
                            double spread, std::uint64_t seed) {
  LabeledDataset out;
  out.num_classes = centers.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<std::size_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = i % centers.size();
  std::shuffle(labels.begin(), labels.end(), rng);
  const std::size_t dim = centers.front().size();
  for (std::size_t label : labels) {
    std::vector<float> x(dim);
    for (std::size_t d = 0; d < dim; ++d) x[d] = static_cast<float>(centers[label][d] + noise(rng));
    out.inputs.emplace_back(std::vector<std::size_t>{dim}, std::move(x));
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace

TrainTest make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, {0}));
  std::normal_distribution<double> center(0.0, spec.center_scale);
  std::vector<std::vector<double>> centers(spec.num_classes, std::vector<double>(spec.dim));
  for (auto& c : centers)
    for (double& v : c) v = center(rng);
  TrainTest out;
  out.train = sample_blobs(centers, spec.train_count, spec.spread, derive_seed(spec.seed, {1}));
  out.test = sample_blobs(centers, spec.test_count, spec.spread, derive_seed(spec.seed, {2}));
  out.test.num_classes = spec.num_classes;
  return out;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail(ErrorCode::kDataLoss, "truncated IDX header in " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::ifstream open_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kNotFound, "cannot open IDX file " + path.string());
  return in;
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes) {
  std::ifstream img = open_idx(images);
  if (read_be32(img, images) != 0x00000803u)
    fail(ErrorCode::kDataLoss, "bad IDX image magic in " + images.string());
  const std::uint32_t count = read_be32(img, images);
  const std::uint32_t rows = read_be32(img, images);
  const std::uint32_t cols = read_be32(img, images);

  std::ifstream lab = open_idx(labels);
  if (read_be32(lab, labels) != 0x00000801u)
    fail(ErrorCode::kDataLoss, "bad IDX label magic in " + labels.string());
  if (read_be32(lab, labels) != count)
    fail(ErrorCode::kDataLoss, "IDX image and label counts differ");

  const std::size_t dim = std::size_t{rows} * cols;
  require(dim > 0, "IDX: empty images");
  LabeledDataset out;
  std::vector<unsigned char> pixels(dim);
  std::size_t max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim)))
      fail(ErrorCode::kDataLoss, "truncated IDX image data");
    std::vector<float> x(dim);
    for (std::size_t d = 0; d < dim; ++d) x[d] = static_cast<float>(pixels[d]) / 255.0f;
    out.inputs.emplace_back(std::vector<std::size_t>{dim}, std::move(x));
    char l;
    if (!lab.get(l)) fail(ErrorCode::kDataLoss, "truncated IDX label data");
    const std::size_t label = static_cast<unsigned char>(l);
    max_label = std::max(max_label, label);
    out.labels.push_back(label);
  }
  out.num_classes = num_classes ? num_classes : max_label + 1;
  out.validate();
  return out;
}

}  // namespace fldebug::fl
