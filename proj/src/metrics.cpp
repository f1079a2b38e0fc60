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

#include "labelfill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "labelfill/error.hpp"
#include "labelfill/format.hpp"

namespace labelfill {

namespace {

void require_aligned(const LabelMap& a, const LabelMap& b, const char* what) {
  require(a.same_extent(b), ErrorKind::Dimension,
          std::string(what) + ": prediction is " + std::to_string(a.height()) + "x" +
              std::to_string(a.width()) + " but reference is " + std::to_string(b.height()) +
              "x" + std::to_string(b.width()));
}

struct Overlap {
  std::size_t p = 0, g = 0, both = 0;
};

Overlap overlap(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  Overlap o;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const bool p = pred[k] == cls, g = gt[k] == cls;
    o.p += p;
    o.g += g;
    o.both += p && g;
  }
  return o;
}

double dsc_of(std::size_t p, std::size_t g, std::size_t both) {
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

double iou_of(std::size_t p, std::size_t g, std::size_t both) {
  const std::size_t uni = p + g - both;
  if (uni == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(uni);
}

using Points = std::vector<std::pair<long, long>>;

Points points_of(const LabelMap& m, std::uint8_t cls) {
  Points pts;
  for (std::size_t i = 0; i < m.height(); ++i) {
    for (std::size_t j = 0; j < m.width(); ++j) {
      if (m(i, j) == cls) pts.emplace_back(static_cast<long>(i), static_cast<long>(j));
    }
  }
  return pts;
}

double directed_sum(const Points& from, const Points& to) {
  double total = 0.0;
  for (const auto& [a, b] : from) {
    long best = std::numeric_limits<long>::max();
    for (const auto& [c, d] : to) {
      best = std::min(best, (a - c) * (a - c) + (b - d) * (b - d));
      if (best == 0) break;
    }
    total += std::sqrt(static_cast<double>(best));
  }
  return total;
}

}  // namespace

double dsc(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  require_aligned(pred, gt, "dsc");
  const Overlap o = overlap(pred, gt, cls);
  return dsc_of(o.p, o.g, o.both);
}

double iou(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  require_aligned(pred, gt, "iou");
  const Overlap o = overlap(pred, gt, cls);
  return iou_of(o.p, o.g, o.both);
}

BahdResult bahd(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  require_aligned(pred, gt, "bahd");
  const Points p = points_of(pred, cls), g = points_of(gt, cls);
  if (p.empty() && g.empty()) return {0.0, false};
  if (p.empty() || g.empty()) {
    const double h = static_cast<double>(gt.height()), w = static_cast<double>(gt.width());
    return {std::sqrt(h * h + w * w), true};
  }
  const double value = (directed_sum(g, p) + directed_sum(p, g)) / (2.0 * static_cast<double>(g.size()));
  return {value, false};
}

SoftScores soft_metrics(const ProbabilityMap& pred, const AnnotationStack& stack,
                        std::span<const double> thresholds, SoftGt mode) {
  require(!thresholds.empty(), ErrorKind::Usage, "soft_metrics needs at least one threshold");
  for (double t : thresholds) {
    require(t > 0.0 && t < 1.0, ErrorKind::Usage,
            "threshold " + std::to_string(t) + " must lie strictly inside (0,1)");
  }
  require(pred.classes() == 2, ErrorKind::Dimension,
          "soft_metrics is defined for binary maps, got " + std::to_string(pred.classes()) +
              " classes");
  require(stack.raters() > 0 && pred.height() == stack.height() && pred.width() == stack.width(),
          ErrorKind::Dimension, "soft_metrics: prediction and stack extents differ");
  const std::size_t h = pred.height(), w = pred.width(), n = h * w;
  const std::size_t r = stack.raters();
  std::vector<std::size_t> votes(n, 0);
  for (const auto& m : stack.maps()) {
    for (std::size_t k = 0; k < n; ++k) votes[k] += m[k] == 1;
  }
  SoftScores out;
  for (double t : thresholds) {
    LabelMap p(h, w);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) p(i, j) = pred(1, i, j) >= t ? 1 : 0;
    }
    double d = 0.0, u = 0.0;
    if (mode == SoftGt::RaterMean) {
      LabelMap g(h, w);
      for (std::size_t k = 0; k < n; ++k) {
        g[k] = static_cast<double>(votes[k]) / static_cast<double>(r) >= t ? 1 : 0;
      }
      const Overlap o = overlap(p, g, 1);
      d = dsc_of(o.p, o.g, o.both);
      u = iou_of(o.p, o.g, o.both);
    } else {
      for (const auto& m : stack.maps()) {
        const Overlap o = overlap(p, m, 1);
        d += dsc_of(o.p, o.g, o.both) / static_cast<double>(r);
        u += iou_of(o.p, o.g, o.both) / static_cast<double>(r);
      }
    }
    out.per_threshold_dsc.push_back(d);
    out.per_threshold_iou.push_back(u);
  }
  const double k = static_cast<double>(thresholds.size());
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    out.dsc += out.per_threshold_dsc[i] / k;
    out.iou += out.per_threshold_iou[i] / k;
  }
  return out;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = std::clamp(sum / static_cast<double>(values.size()), s.min, s.max);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

void EvalReport::add(std::size_t image, const std::string& metric, double value, bool flagged) {
  records.push_back({image, metric, value, flagged});
}

std::vector<std::string> EvalReport::metric_names() const {
  std::vector<std::string> names;
  for (const auto& r : records) {
    if (std::find(names.begin(), names.end(), r.metric) == names.end()) names.push_back(r.metric);
  }
  return names;
}

std::vector<double> EvalReport::values(const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.metric == metric) out.push_back(r.value);
  }
  return out;
}

std::map<std::string, MetricSummary> EvalReport::aggregate() const {
  std::map<std::string, MetricSummary> out;
  for (const auto& name : metric_names()) {
    const auto v = values(name);
    MetricSummary s = summarize(v);
    for (const auto& r : records) s.flagged += r.metric == name && r.flagged;
    out[name] = s;
  }
  return out;
}

std::string EvalReport::to_csv(bool header) const {
  std::ostringstream os;
  if (header) os << "image,method,metric,value,flagged\n";
  for (const auto& r : records) {
    os << r.image << ',' << method << ',' << r.metric << ',' << format_double(r.value) << ',' << (r.flagged ? 1 : 0)
       << '\n';
  }
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["seed"] = seed;
  for (const auto& [name, s] : aggregate()) {
    j["aggregate"][name] = {{"mean", s.mean}, {"std", s.std},     {"min", s.min},
                            {"max", s.max},   {"count", s.count}, {"flagged", s.flagged}};
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : records) {
    rows.push_back({{"image", r.image}, {"metric", r.metric}, {"value", r.value}, {"flagged", r.flagged}});
  }
  j["records"] = std::move(rows);
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  EvalReport rep;
  try {
    const auto j = nlohmann::json::parse(text);
    rep.method = j.at("method").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& r : j.at("records")) {
      rep.add(r.at("image").get<std::size_t>(), r.at("metric").get<std::string>(),
              r.at("value").get<double>(), r.at("flagged").get<bool>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("evaluation report: ") + e.what());
  }
  return rep;
}

}  // namespace labelfill
