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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "labelfill/tensor.hpp"

namespace labelfill {

// Binary tensor container:
//   "LFT1" | u8 dtype (0 = f64, 1 = u8) | u8 ndim | ndim x u32le extents |
//   row-major little-endian payload
inline constexpr std::uint8_t kDtypeF64 = 0;
inline constexpr std::uint8_t kDtypeU8 = 1;

using AnyTensor = std::variant<Tensor, ByteTensor>;

std::vector<std::uint8_t> encode_container(const Tensor& t);
std::vector<std::uint8_t> encode_container(const ByteTensor& t);
AnyTensor decode_container(std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
void save_tensor(const std::filesystem::path& path, const ByteTensor& t);
Tensor load_f64(const std::filesystem::path& path);
ByteTensor load_u8(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace labelfill
