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

#include "labelfill/tensor.hpp"

#include <cmath>
#include <sstream>

#include "labelfill/error.hpp"

namespace labelfill {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == element_count(shape_), ErrorKind::Dimension,
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_string(shape_));
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorKind::Dimension,
          "item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  require(index.size() == shape_.size(), ErrorKind::Dimension,
          "index rank " + std::to_string(index.size()) + " for shape " +
              shape_string(shape_));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    require(i < shape_[axis], ErrorKind::Dimension,
            "index " + std::to_string(i) + " out of range on axis " +
                std::to_string(axis) + " of shape " + shape_string(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

Tensor Tensor::reshaped(Shape shape) const {
  require(element_count(shape) == data_.size(), ErrorKind::Dimension,
          "cannot reshape " + shape_string(shape_) + " to " +
              shape_string(shape));
  return Tensor(std::move(shape), data_);
}

ByteTensor::ByteTensor(Shape shape, std::uint8_t fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

ByteTensor::ByteTensor(Shape shape, std::vector<std::uint8_t> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == element_count(shape_), ErrorKind::Dimension,
          "byte tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_string(shape_));
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorKind::Numeric, "non-finite value in " + what + " at flat index " +
                                   std::to_string(i));
    }
  }
}

}  // namespace labelfill
