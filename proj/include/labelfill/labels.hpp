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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "labelfill/tensor.hpp"

namespace labelfill {

// Integer class map over an H x W grid, row-major.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::size_t height, std::size_t width, std::uint8_t fill = 0);
  LabelMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels);

  static LabelMap from_tensor(const ByteTensor& t);  // [H,W]
  ByteTensor to_tensor() const;

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return labels_[i * width_ + j]; }
  std::uint8_t& operator()(std::size_t i, std::size_t j) { return labels_[i * width_ + j]; }
  std::uint8_t operator[](std::size_t k) const { return labels_[k]; }
  std::uint8_t& operator[](std::size_t k) { return labels_[k]; }

  std::span<const std::uint8_t> data() const noexcept { return labels_; }
  std::span<std::uint8_t> data() noexcept { return labels_; }

  std::size_t count(std::uint8_t cls) const;
  std::uint8_t max_label() const;
  bool same_extent(const LabelMap& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool operator==(const LabelMap& other) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> labels_;
};

// 0/1 map of pixels whose majority label is trusted.
class TrustMask {
 public:
  TrustMask() = default;
  explicit TrustMask(LabelMap bits) : bits_(std::move(bits)) {}
  static TrustMask all(std::size_t height, std::size_t width) {
    return TrustMask(LabelMap(height, width, 1));
  }

  bool operator()(std::size_t i, std::size_t j) const { return bits_(i, j) != 0; }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  std::size_t height() const noexcept { return bits_.height(); }
  std::size_t width() const noexcept { return bits_.width(); }
  std::size_t size() const noexcept { return bits_.size(); }
  std::size_t count() const { return bits_.count(1); }
  const LabelMap& bits() const noexcept { return bits_; }

  bool operator==(const TrustMask& other) const = default;

 private:
  LabelMap bits_;
};

// R aligned label maps of one image; rater id = position.
class AnnotationStack {
 public:
  AnnotationStack() = default;
  explicit AnnotationStack(std::vector<LabelMap> maps);

  static AnnotationStack from_tensor(const ByteTensor& t);  // [R,H,W]
  ByteTensor to_tensor() const;

  std::size_t raters() const noexcept { return maps_.size(); }
  std::size_t height() const noexcept { return maps_.empty() ? 0 : maps_[0].height(); }
  std::size_t width() const noexcept { return maps_.empty() ? 0 : maps_[0].width(); }
  const LabelMap& operator[](std::size_t r) const { return maps_.at(r); }
  const std::vector<LabelMap>& maps() const noexcept { return maps_; }

  bool operator==(const AnnotationStack& other) const = default;

 private:
  std::vector<LabelMap> maps_;
};

// L x H x W class probabilities; each pixel column sums to one.
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  ProbabilityMap(std::size_t classes, std::size_t height, std::size_t width);
  explicit ProbabilityMap(Tensor values);  // [L,H,W]

  std::size_t classes() const { return values_.dim(0); }
  std::size_t height() const { return values_.dim(1); }
  std::size_t width() const { return values_.dim(2); }

  double operator()(std::size_t l, std::size_t i, std::size_t j) const {
    return values_[(l * height() + i) * width() + j];
  }
  double& operator()(std::size_t l, std::size_t i, std::size_t j) {
    return values_[(l * height() + i) * width() + j];
  }

  const Tensor& tensor() const noexcept { return values_; }

  // Per-pixel argmax; ties go to the smallest class index.
  LabelMap argmax() const;

 private:
  Tensor values_{Shape{0, 0, 0}};
};

}  // namespace labelfill
