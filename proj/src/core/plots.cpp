/**
 * Copyright 2026 The xpose Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "xpose/plots.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xpose/errors.hpp"

namespace xpose {

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string box_plot_svg(const std::string& title, const std::string& unit, const std::vector<BoxPlotSeries>& series) {
  require(!series.empty(), ErrorCode::InvalidArgument, "box plot needs at least one series");
  for (const auto& s : series) {
    require(!s.stats.reference && s.stats.count > 0, ErrorCode::InvalidArgument,
            "box plot series '" + s.label + "' has no measured data");
  }
  double lo = series[0].stats.whisker_low, hi = series[0].stats.whisker_high;
  for (const auto& s : series) {
    lo = std::min(lo, s.stats.whisker_low);
    hi = std::max(hi, s.stats.whisker_high);
  }
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const int box_w = 60, gap = 40, left = 70, top = 40, plot_h = 300;
  const int width = left + static_cast<int>(series.size()) * (box_w + gap) + gap;
  const int height = top + plot_h + 60;
  auto ypix = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" data-whisker-rule=\"1.5*IQR\">\n";
  o << "<title>" << escape_xml(title) << "</title>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title)
    << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const double y = ypix(v);
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", v);
    o << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
      << "\" stroke=\"black\"/><text x=\"" << left - 6 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << label << "</text>\n";
  }
  o << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 "
    << top + plot_h / 2 << ")\" text-anchor=\"middle\">" << escape_xml(unit) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Summary& s = series[i].stats;
    const double x0 = left + gap + static_cast<double>(i) * (box_w + gap);
    const double xc = x0 + box_w / 2.0;
    o << "<g class=\"box\" data-label=\"" << escape_xml(series[i].label) << "\" data-count=\"" << s.count
      << "\" data-q1=\"" << fmt_double(s.q1) << "\" data-median=\"" << fmt_double(s.median) << "\" data-q3=\""
      << fmt_double(s.q3) << "\" data-whisker-low=\"" << fmt_double(s.whisker_low) << "\" data-whisker-high=\""
      << fmt_double(s.whisker_high) << "\" data-outlier-fraction=\"" << fmt_double(s.outlier_fraction) << "\">\n";
    o << "  <line x1=\"" << xc << "\" y1=\"" << ypix(s.whisker_high) << "\" x2=\"" << xc << "\" y2=\""
      << ypix(s.q3) << "\" stroke=\"black\"/>\n";
    o << "  <line x1=\"" << xc << "\" y1=\"" << ypix(s.q1) << "\" x2=\"" << xc << "\" y2=\""
      << ypix(s.whisker_low) << "\" stroke=\"black\"/>\n";
    o << "  <rect x=\"" << x0 << "\" y=\"" << ypix(s.q3) << "\" width=\"" << box_w << "\" height=\""
      << std::max(0.5, ypix(s.q1) - ypix(s.q3)) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    o << "  <line x1=\"" << x0 << "\" y1=\"" << ypix(s.median) << "\" x2=\"" << x0 + box_w << "\" y2=\""
      << ypix(s.median) << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    char frac[48];
    std::snprintf(frac, sizeof frac, "outliers %.1f%%", 100.0 * s.outlier_fraction);
    o << "  <text x=\"" << xc << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << escape_xml(series[i].label) << "</text>\n";
    o << "  <text x=\"" << xc << "\" y=\"" << top + plot_h + 32 << "\" text-anchor=\"middle\" font-size=\"9\">"
      << frac << "</text>\n";
    o << "</g>\n";
  }
  o << "<text x=\"" << left << "\" y=\"" << height - 6
    << "\" font-size=\"9\">whiskers: most extreme data within 1.5 IQR of the box</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace xpose
