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
#include <span>
#include <string>
#include <vector>

namespace labelfill {

struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Static charts without timestamps or other run-dependent metadata.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const SvgSeries> series);
std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          std::span<const std::string> labels, std::span<const double> values,
                          std::span<const double> errors);
// Each box is {min, q1, median, q3, max}.
std::string svg_box_chart(const std::string& title, const std::string& y_label,
                          std::span<const std::string> labels, std::span<const std::array<double, 5>> boxes);

// Linear-interpolation quantiles of unsorted values.
std::array<double, 5> five_number_summary(std::vector<double> values);

}  // namespace labelfill
