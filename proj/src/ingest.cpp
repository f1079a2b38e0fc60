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

#include "labelfill/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "labelfill/error.hpp"
#include "labelfill/io.hpp"
#include "labelfill/rng.hpp"

namespace labelfill {

namespace {

[[noreturn]] void parse_fail(std::size_t offset, const std::string& msg) {
  fail(ErrorKind::Parse, "IDX parse error at byte offset " + std::to_string(offset) + ": " + msg);
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) {
    parse_fail(bytes.size() < offset ? offset : bytes.size(),
               "truncated header (need 4 bytes at offset " + std::to_string(offset) + ")");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Tensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) parse_fail(0, "empty stream");
  const std::uint32_t magic = read_be32(bytes, 0);
  if ((magic >> 16) != 0) parse_fail(0, "bad magic (leading bytes must be zero)");
  if (((magic >> 8) & 0xff) != 0x08) {
    parse_fail(2, "unsupported element type 0x" + std::to_string((magic >> 8) & 0xff));
  }
  if (magic != kIdxImageMagic && magic != kIdxLabelMagic) {
    parse_fail(3, "unsupported dimension count " + std::to_string(magic & 0xff));
  }
  const std::size_t ndim = magic & 0xff;
  Shape shape;
  for (std::size_t d = 0; d < ndim; ++d) shape.push_back(read_be32(bytes, 4 + 4 * d));
  const std::size_t header = 4 + 4 * ndim;
  const std::size_t count = element_count(shape);
  if (bytes.size() < header + count) {
    parse_fail(bytes.size(), "truncated payload: expected " + std::to_string(count) +
                                 " bytes after the header, found " +
                                 std::to_string(bytes.size() - header));
  }
  if (bytes.size() > header + count) parse_fail(header + count, "trailing bytes after payload");
  std::vector<double> values(count);
  const double scale = magic == kIdxImageMagic ? 255.0 : 1.0;
  for (std::size_t k = 0; k < count; ++k) values[k] = bytes[header + k] / scale;
  return Tensor(std::move(shape), std::move(values));
}

Tensor load_idx(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_idx(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

LabelMap binarize_gt(const Tensor& image) {
  const Shape& s = image.shape();
  require(s.size() == 2 || (s.size() == 3 && s[0] == 1), ErrorKind::Dimension,
          "binarize_gt expects [H,W] or [1,H,W], got " + shape_string(s));
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  LabelMap out(h, w);
  for (std::size_t k = 0; k < h * w; ++k) out[k] = image[k] >= 0.5 ? 1 : 0;
  return out;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& fractions) {
  const std::array<double, 3> f{fractions.train, fractions.val, fractions.test};
  for (double x : f) {
    require(x >= 0.0 && x <= 1.0, ErrorKind::Usage,
            "split fraction " + std::to_string(x) + " outside [0,1]");
  }
  const double total = f[0] + f[1] + f[2];
  require(std::abs(total - 1.0) < 1e-9, ErrorKind::Usage,
          "split fractions must sum to 1, got " + std::to_string(total));
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double quota = f[k] * static_cast<double>(n);
    // Snap quotas that are integral up to rounding noise (0.64 * 100 etc).
    const double snapped = std::round(quota);
    const double q = std::abs(quota - snapped) < 1e-9 ? snapped : quota;
    sizes[k] = static_cast<std::size_t>(std::floor(q));
    remainder[k] = q - std::floor(q);
    assigned += sizes[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

SplitAssignment split_dataset(std::size_t n, const SplitFractions& fractions,
                              std::uint64_t seed) {
  const auto sizes = split_sizes(n, fractions);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(seed, 0x5eed));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  SplitAssignment out(n, Split::Train);
  for (std::size_t k = 0; k < n; ++k) {
    out[perm[k]] = k < sizes[0] ? Split::Train : (k < sizes[0] + sizes[1] ? Split::Val : Split::Test);
  }
  return out;
}

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < split.size(); ++k) {
    if (split[k] == which) out.push_back(k);
  }
  return out;
}

void Dataset::validate() const {
  require(images.size() == gt_labels.size() && images.size() == split.size(), ErrorKind::Data,
          "dataset lists are misaligned: " + std::to_string(images.size()) + " images, " +
              std::to_string(gt_labels.size()) + " label maps, " + std::to_string(split.size()) +
              " split entries");
  for (std::size_t k = 0; k < images.size(); ++k) {
    const Shape& s = images[k].shape();
    require(s.size() == 3 && s[0] == 1 && s[1] == gt_labels[k].height() &&
                s[2] == gt_labels[k].width(),
            ErrorKind::Data, "dataset item " + std::to_string(k) + " has image " +
                                 shape_string(s) + " but label map " +
                                 std::to_string(gt_labels[k].height()) + "x" +
                                 std::to_string(gt_labels[k].width()));
  }
}

namespace {

void append_images(Dataset& ds, const Tensor& stack, std::size_t limit) {
  require(stack.ndim() == 3, ErrorKind::Data,
          "expected an IDX image file, got shape " + shape_string(stack.shape()));
  const std::size_t n = std::min(limit, stack.dim(0));
  const std::size_t h = stack.dim(1), w = stack.dim(2);
  for (std::size_t k = 0; k < n; ++k) {
    auto first = stack.values().begin() + static_cast<std::ptrdiff_t>(k * h * w);
    Tensor img(Shape{1, h, w}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(h * w)));
    ds.gt_labels.push_back(binarize_gt(img));
    ds.images.push_back(std::move(img));
  }
}

}  // namespace

Dataset ingest_mnist(const IngestOptions& options) {
  Dataset ds;
  ds.seed = options.seed;
  append_images(ds, load_idx(options.train_images), options.train_limit);
  ds.split = split_dataset(ds.images.size(), options.fractions, options.seed);
  if (options.test_images) {
    const std::size_t before = ds.images.size();
    append_images(ds, load_idx(*options.test_images), options.test_limit);
    ds.split.resize(ds.images.size(), Split::Test);
    if (before > 0) {
      require(ds.images.back().shape() == ds.images.front().shape(), ErrorKind::Data,
              "train and test images differ in extent");
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  dataset.validate();
  require(!dataset.images.empty(), ErrorKind::Data, "refusing to save an empty dataset");
  const std::size_t n = dataset.size();
  const std::size_t h = dataset.gt_labels[0].height(), w = dataset.gt_labels[0].width();
  std::vector<double> pix;
  std::vector<std::uint8_t> labels;
  pix.reserve(n * h * w);
  labels.reserve(n * h * w);
  for (std::size_t k = 0; k < n; ++k) {
    require(dataset.gt_labels[k].height() == h && dataset.gt_labels[k].width() == w,
            ErrorKind::Data, "dataset items must share one extent to be saved");
    pix.insert(pix.end(), dataset.images[k].values().begin(), dataset.images[k].values().end());
    labels.insert(labels.end(), dataset.gt_labels[k].data().begin(), dataset.gt_labels[k].data().end());
  }
  save_tensor(dir / "images.lft", Tensor(Shape{n, 1, h, w}, std::move(pix)));
  save_tensor(dir / "gt.lft", ByteTensor(Shape{n, h, w}, std::move(labels)));
  nlohmann::json manifest;
  manifest["images"] = "images.lft";
  manifest["gt_labels"] = "gt.lft";
  manifest["count"] = n;
  manifest["height"] = h;
  manifest["width"] = w;
  manifest["seed"] = dataset.seed;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    manifest["split"][to_string(s)] = dataset.indices(s);
  }
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, (dir / "manifest.json").string() + ": " + e.what());
  }
  Dataset ds;
  try {
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    const Tensor images = load_f64(dir / manifest.at("images").get<std::string>());
    const ByteTensor gt = load_u8(dir / manifest.at("gt_labels").get<std::string>());
    require(images.ndim() == 4 && images.dim(1) == 1 && gt.shape().size() == 3 &&
                gt.shape()[0] == images.dim(0) && gt.shape()[1] == images.dim(2) &&
                gt.shape()[2] == images.dim(3),
            ErrorKind::Data, "dataset tensors disagree: images " + shape_string(images.shape()) +
                                 ", labels " + shape_string(gt.shape()));
    const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
    for (std::size_t k = 0; k < n; ++k) {
      auto pf = images.values().begin() + static_cast<std::ptrdiff_t>(k * h * w);
      ds.images.emplace_back(Shape{1, h, w}, std::vector<double>(pf, pf + static_cast<std::ptrdiff_t>(h * w)));
      auto lf = gt.data().begin() + static_cast<std::ptrdiff_t>(k * h * w);
      ds.gt_labels.emplace_back(h, w, std::vector<std::uint8_t>(lf, lf + static_cast<std::ptrdiff_t>(h * w)));
    }
    ds.split.assign(n, Split::Train);
    std::vector<int> seen(n, 0);
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      for (std::size_t idx : manifest.at("split").at(to_string(s)).get<std::vector<std::size_t>>()) {
        require(idx < n, ErrorKind::Integrity,
                "split index " + std::to_string(idx) + " out of range in manifest");
        require(seen[idx]++ == 0, ErrorKind::Integrity,
                "index " + std::to_string(idx) + " appears in two splits");
        ds.split[idx] = s;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      require(seen[k] == 1, ErrorKind::Integrity,
              "index " + std::to_string(k) + " missing from the split");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, (dir / "manifest.json").string() + ": " + e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace labelfill
