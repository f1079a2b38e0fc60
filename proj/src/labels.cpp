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

#include "labelfill/labels.hpp"

#include <algorithm>

#include "labelfill/error.hpp"

namespace labelfill {

LabelMap::LabelMap(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), labels_(height * width, fill) {}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  require(labels_.size() == height * width, ErrorKind::Dimension,
          "label map data length " + std::to_string(labels_.size()) + " does not match " +
              std::to_string(height) + "x" + std::to_string(width));
}

LabelMap LabelMap::from_tensor(const ByteTensor& t) {
  require(t.shape().size() == 2, ErrorKind::Dimension,
          "label map tensor must be [H,W], got " + shape_string(t.shape()));
  return LabelMap(t.shape()[0], t.shape()[1],
                  std::vector<std::uint8_t>(t.data().begin(), t.data().end()));
}

ByteTensor LabelMap::to_tensor() const { return ByteTensor(Shape{height_, width_}, labels_); }

std::size_t LabelMap::count(std::uint8_t cls) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), cls));
}

std::uint8_t LabelMap::max_label() const {
  return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
}

AnnotationStack::AnnotationStack(std::vector<LabelMap> maps) : maps_(std::move(maps)) {
  for (const auto& m : maps_) {
    require(m.same_extent(maps_.front()), ErrorKind::Dimension,
            "annotation stack maps differ in extent: " + std::to_string(m.height()) + "x" +
                std::to_string(m.width()) + " vs " + std::to_string(maps_.front().height()) +
                "x" + std::to_string(maps_.front().width()));
  }
}

AnnotationStack AnnotationStack::from_tensor(const ByteTensor& t) {
  require(t.shape().size() == 3, ErrorKind::Dimension,
          "annotation stack tensor must be [R,H,W], got " + shape_string(t.shape()));
  const std::size_t r = t.shape()[0], h = t.shape()[1], w = t.shape()[2];
  std::vector<LabelMap> maps;
  for (std::size_t k = 0; k < r; ++k) {
    auto first = t.data().begin() + static_cast<std::ptrdiff_t>(k * h * w);
    maps.emplace_back(h, w, std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(h * w)));
  }
  return AnnotationStack(std::move(maps));
}

ByteTensor AnnotationStack::to_tensor() const {
  std::vector<std::uint8_t> data;
  data.reserve(raters() * height() * width());
  for (const auto& m : maps_) data.insert(data.end(), m.data().begin(), m.data().end());
  return ByteTensor(Shape{raters(), height(), width()}, std::move(data));
}

ProbabilityMap::ProbabilityMap(std::size_t classes, std::size_t height, std::size_t width)
    : values_(Shape{classes, height, width}, 0.0) {}

ProbabilityMap::ProbabilityMap(Tensor values) : values_(std::move(values)) {
  require(values_.ndim() == 3, ErrorKind::Dimension,
          "probability map must be [L,H,W], got " + shape_string(values_.shape()));
}

LabelMap ProbabilityMap::argmax() const {
  LabelMap out(height(), width());
  for (std::size_t i = 0; i < height(); ++i) {
    for (std::size_t j = 0; j < width(); ++j) {
      std::size_t best = 0;
      for (std::size_t l = 1; l < classes(); ++l) {
        if ((*this)(l, i, j) > (*this)(best, i, j)) best = l;
      }
      out(i, j) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

}  // namespace labelfill
