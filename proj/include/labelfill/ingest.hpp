// Copyright 2026 The labelfill Authors.
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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelfill/labels.hpp"
#include "labelfill/tensor.hpp"

namespace labelfill {

// IDX: big-endian magic 0x0000 | dtype | ndim, then ndim u32be extents.
// Only unsigned-byte payloads (dtype 0x08) occur in MNIST.
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Image files give [N,H,W] scaled by 1/255; label files give [N] raw values.
Tensor parse_idx(std::span<const std::uint8_t> bytes);
Tensor load_idx(const std::filesystem::path& path);

LabelMap binarize_gt(const Tensor& image);  // [H,W] or [1,H,W]

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

const char* to_string(Split split);

struct SplitFractions {
  double train = 0.8;
  double val = 0.2;
  double test = 0.0;
};

// Per-index split tag.
using SplitAssignment = std::vector<Split>;

// Largest-remainder quotas; ties in the remainder go to the earlier split.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& fractions);
SplitAssignment split_dataset(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

struct Dataset {
  std::vector<Tensor> images;  // [1,H,W]
  std::vector<LabelMap> gt_labels;
  SplitAssignment split;
  std::uint64_t seed = 0;

  std::size_t size() const { return images.size(); }
  std::vector<std::size_t> indices(Split which) const;
  void validate() const;
};

struct IngestOptions {
  std::filesystem::path train_images;
  std::optional<std::filesystem::path> test_images;
  std::size_t train_limit = 1000;
  std::size_t test_limit = 200;
  SplitFractions fractions;
  std::uint64_t seed = 0;
};

// The train-file pool is split by `fractions`; test-file images are appended
// with split Test.
Dataset ingest_mnist(const IngestOptions& options);

// Directory layout: images.lft [N,1,H,W] f64, gt.lft [N,H,W] u8, manifest.json.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace labelfill
