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

#include "labelfill/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "labelfill/error.hpp"

namespace labelfill {
namespace {

constexpr char kMagic[4] = {'L', 'F', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_header(std::vector<std::uint8_t>& out, std::uint8_t dtype, const Shape& shape) {
  require(shape.size() <= 255, ErrorKind::Dimension,
          "container supports at most 255 axes, got " + std::to_string(shape.size()));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(dtype);
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) {
    require(d <= 0xffffffffu, ErrorKind::Dimension, "extent exceeds u32 range");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_container(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * t.ndim() + 8 * t.size());
  put_header(out, kDtypeF64, t.shape());
  for (double v : t.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

std::vector<std::uint8_t> encode_container(const ByteTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * t.shape().size() + t.size());
  put_header(out, kDtypeU8, t.shape());
  out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

AnyTensor decode_container(std::span<const std::uint8_t> bytes) {
  auto need = [&](std::size_t offset, std::size_t count) {
    if (bytes.size() < offset + count) {
      fail(ErrorKind::Parse, "truncated container at byte offset " +
                                 std::to_string(bytes.size()) + " (needed " +
                                 std::to_string(offset + count) + ")");
    }
  };
  need(0, 6);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::Parse, "bad container magic at byte offset 0");
  }
  const std::uint8_t dtype = bytes[4];
  const std::size_t ndim = bytes[5];
  need(6, 4 * ndim);
  Shape shape(ndim);
  for (std::size_t a = 0; a < ndim; ++a) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[6 + 4 * a + i]} << (8 * i);
    shape[a] = v;
  }
  const std::size_t header = 6 + 4 * ndim;
  const std::size_t n = element_count(shape);
  if (dtype == kDtypeF64) {
    need(header, 8 * n);
    std::vector<double> data(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[header + 8 * k + i]} << (8 * i);
      data[k] = std::bit_cast<double>(bits);
    }
    require(bytes.size() == header + 8 * n, ErrorKind::Parse,
            "trailing bytes after container payload at offset " +
                std::to_string(header + 8 * n));
    return Tensor(std::move(shape), std::move(data));
  }
  if (dtype == kDtypeU8) {
    need(header, n);
    require(bytes.size() == header + n, ErrorKind::Parse,
            "trailing bytes after container payload at offset " + std::to_string(header + n));
    std::vector<std::uint8_t> data(bytes.begin() + header, bytes.end());
    return ByteTensor(std::move(shape), std::move(data));
  }
  fail(ErrorKind::Parse, "unknown container dtype code " + std::to_string(dtype) +
                             " at byte offset 4");
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_atomic(path, encode_container(t));
}

void save_tensor(const std::filesystem::path& path, const ByteTensor& t) {
  write_file_atomic(path, encode_container(t));
}

Tensor load_f64(const std::filesystem::path& path) {
  auto any = decode_container(read_file(path));
  if (auto* t = std::get_if<Tensor>(&any)) return std::move(*t);
  fail(ErrorKind::Data, "expected f64 container in " + path.string());
}

ByteTensor load_u8(const std::filesystem::path& path) {
  auto any = decode_container(read_file(path));
  if (auto* t = std::get_if<ByteTensor>(&any)) return std::move(*t);
  fail(ErrorKind::Data, "expected u8 container in " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string());
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

}  // namespace labelfill
