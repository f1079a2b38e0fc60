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

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "doctest.h"
#include "labelfill/error.hpp"
#include "labelfill/labels.hpp"
#include "labelfill/rng.hpp"

namespace labelfill::testing {

inline ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Usage;
}

inline std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an Error");
  return {};
}

// Builds a map from rows of '.' (0) and digits.
inline LabelMap map_from(std::initializer_list<const char*> rows) {
  const std::size_t h = rows.size();
  const std::size_t w = std::string(*rows.begin()).size();
  LabelMap m(h, w);
  std::size_t i = 0;
  for (const char* row : rows) {
    for (std::size_t j = 0; j < w; ++j) m(i, j) = row[j] == '.' ? 0 : static_cast<std::uint8_t>(row[j] - '0');
    ++i;
  }
  return m;
}

inline LabelMap random_binary_map(std::size_t h, std::size_t w, Rng& rng, double p = 0.4) {
  LabelMap m(h, w);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.uniform() < p ? 1 : 0;
  return m;
}

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace labelfill::testing
