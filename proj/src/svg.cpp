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


#include "labelfill/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "labelfill/error.hpp"

namespace labelfill {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo, hi;
  double map(double v, double a, double b) const { return hi == lo ? (a + b) / 2 : a + (v - lo) / (hi - lo) * (b - a); }
};

Axis padded(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0, 1};
  if (hi - lo < 1e-12) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

class Canvas {
 public:
  explicit Canvas(const std::string& title) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n";
  }

  void frame(const Axis& y, const std::string& y_label) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    os_ << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0)
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1)
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = y.lo + (y.hi - y.lo) * k / 4.0;
      const double py = y.map(v, y0, y1);
      os_ << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(py)
          << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << label_num(v)
          << "</text>\n";
    }
    os_ << "<text x=\"16\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << num((y0 + y1) / 2) << ")\">" << escape(y_label) << "</text>\n";
  }

  std::ostringstream& out() { return os_; }
  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  std::ostringstream os_;
};

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const SvgSeries> series) {
  double xl = INFINITY, xh = -INFINITY, yl = INFINITY, yh = -INFINITY;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorKind::Dimension, "series '" + s.name + "' has mismatched x and y");
    for (double v : s.x) xl = std::min(xl, v), xh = std::max(xh, v);
    for (double v : s.y) yl = std::min(yl, v), yh = std::max(yh, v);
  }
  const Axis ax = padded(xl, xh), ay = padded(yl, yh);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  Canvas c(title);
  c.frame(ay, y_label);
  auto& os = c.out();
  for (int k = 0; k <= 4; ++k) {
    const double v = ax.lo + (ax.hi - ax.lo) * k / 4.0;
    os << "<text x=\"" << num(ax.map(v, x0, x1)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
       << label_num(v) << "</text>\n";
  }
  os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < series[s].x.size(); ++k) {
      os << (k ? " " : "") << num(ax.map(series[s].x[k], x0, x1)) << ',' << num(ay.map(series[s].y[k], y0, y1));
    }
    os << "\"/>\n";
    for (std::size_t k = 0; k < series[s].x.size(); ++k) {
      os << "<circle cx=\"" << num(ax.map(series[s].x[k], x0, x1)) << "\" cy=\"" << num(ay.map(series[s].y[k], y0, y1))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    os << "<text x=\"" << num(x1 - 4) << "\" y=\"" << num(y1 + 14 * (s + 1)) << "\" text-anchor=\"end\" fill=\"" << color
       << "\">" << escape(series[s].name) << "</text>\n";
  }
  return c.finish();
}

std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          std::span<const std::string> labels, std::span<const double> values,
                          std::span<const double> errors) {
  require(labels.size() == values.size() && (errors.empty() || errors.size() == values.size()),
          ErrorKind::Dimension, "bar chart inputs differ in length");
  double hi = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) hi = std::max(hi, values[k] + (errors.empty() ? 0.0 : errors[k]));
  const Axis ay{0.0, hi > 0 ? hi * 1.05 : 1.0};
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  Canvas c(title);
  c.frame(ay, y_label);
  auto& os = c.out();
  const double slot = values.empty() ? 0.0 : (x1 - x0) / static_cast<double>(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double left = x0 + slot * (static_cast<double>(k) + 0.2), width = slot * 0.6;
    const double top = ay.map(values[k], y0, y1);
    os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(width) << "\" height=\""
       << num(y0 - top) << "\" fill=\"" << kPalette[k % std::size(kPalette)] << "\"/>\n";
    if (!errors.empty()) {
      const double mid = left + width / 2;
      os << "<line x1=\"" << num(mid) << "\" y1=\"" << num(ay.map(values[k] - errors[k], y0, y1)) << "\" x2=\""
         << num(mid) << "\" y2=\"" << num(ay.map(values[k] + errors[k], y0, y1)) << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"" << num(left + width / 2) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
       << escape(labels[k]) << "</text>\n"
       << "<text x=\"" << num(left + width / 2) << "\" y=\"" << num(top - 4) << "\" text-anchor=\"middle\">"
       << label_num(values[k]) << "</text>\n";
  }
  return c.finish();
}

std::string svg_box_chart(const std::string& title, const std::string& y_label,
                          std::span<const std::string> labels, std::span<const std::array<double, 5>> boxes) {
  require(labels.size() == boxes.size(), ErrorKind::Dimension, "box chart inputs differ in length");
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& b : boxes) lo = std::min(lo, b[0]), hi = std::max(hi, b[4]);
  const Axis ay = padded(lo, hi);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  Canvas c(title);
  c.frame(ay, y_label);
  auto& os = c.out();
  const double slot = boxes.empty() ? 0.0 : (x1 - x0) / static_cast<double>(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const auto& b = boxes[k];
    const double left = x0 + slot * (static_cast<double>(k) + 0.25), width = slot * 0.5, mid = left + width / 2;
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<line x1=\"" << num(mid) << "\" y1=\"" << num(ay.map(b[0], y0, y1)) << "\" x2=\"" << num(mid) << "\" y2=\""
       << num(ay.map(b[4], y0, y1)) << "\" stroke=\"black\"/>\n"
       << "<rect x=\"" << num(left) << "\" y=\"" << num(ay.map(b[3], y0, y1)) << "\" width=\"" << num(width)
       << "\" height=\"" << num(ay.map(b[1], y0, y1) - ay.map(b[3], y0, y1)) << "\" fill=\"" << color
       << "\" fill-opacity=\"0.5\" stroke=\"black\"/>\n"
       << "<line x1=\"" << num(left) << "\" y1=\"" << num(ay.map(b[2], y0, y1)) << "\" x2=\"" << num(left + width)
       << "\" y2=\"" << num(ay.map(b[2], y0, y1)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << num(mid) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">" << escape(labels[k])
       << "</text>\n";
  }
  return c.finish();
}

std::array<double, 5> five_number_summary(std::vector<double> values) {
  require(!values.empty(), ErrorKind::Usage, "no values to summarize");
  std::sort(values.begin(), values.end());
  auto q = [&](double f) {
    const double pos = f * static_cast<double>(values.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < values.size() ? values[i] * (1 - frac) + values[i + 1] * frac : values[i];
  };
  return {values.front(), q(0.25), q(0.5), q(0.75), values.back()};
}

}  // namespace labelfill
