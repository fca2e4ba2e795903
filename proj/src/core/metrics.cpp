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

#include "xpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "xpose/errors.hpp"

namespace xpose {

ErrorReport compute_errors(const Pose& predicted, const Pose& truth, const ProjectionGeometry& geom,
                           double tau_validity_limit_deg) {
  ErrorReport e;
  e.position_px = std::hypot(predicted.x - truth.x, predicted.y - truth.y);
  e.position_mm = e.position_px * geom.pixel_spacing * truth.depth / geom.source_detector_distance;
  e.forward_angle_signed_deg = angle_error(predicted.alpha, truth.alpha);
  e.forward_angle_deg = std::abs(e.forward_angle_signed_deg);
  e.projection_angle_deg = std::abs(std::abs(predicted.tau) - std::abs(truth.tau));
  e.depth_signed_mm = predicted.depth - truth.depth;
  e.depth_mm = std::abs(e.depth_signed_mm);
  e.tau_beyond_validity = std::abs(truth.tau) >= tau_validity_limit_deg;
  return e;
}

double percentile_sorted(const std::vector<double>& sorted, double p) {
  require(!sorted.empty(), ErrorCode::InvalidArgument, "percentile of an empty sample");
  require(p >= 0.0 && p <= 1.0, ErrorCode::InvalidArgument, "percentile fraction must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Summary summarize(const std::string& method, const std::string& metric, const std::string& unit,
                  std::vector<double> values) {
  require(!values.empty(), ErrorCode::InvalidArgument, "cannot summarize an empty sample for " + metric);
  std::sort(values.begin(), values.end());
  Summary s;
  s.method = method;
  s.metric = metric;
  s.unit = unit;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  s.min = values.front();
  s.max = values.back();
  s.q1 = percentile_sorted(values, 0.25);
  s.median = percentile_sorted(values, 0.5);
  s.q3 = percentile_sorted(values, 0.75);
  s.p95 = percentile_sorted(values, 0.95);
  s.p99 = percentile_sorted(values, 0.99);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr, hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.max;
  s.whisker_high = s.min;
  std::size_t outliers = 0;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      ++outliers;
      continue;
    }
    s.whisker_low = std::min(s.whisker_low, v);
    s.whisker_high = std::max(s.whisker_high, v);
  }
  s.outlier_fraction = static_cast<double>(outliers) / static_cast<double>(values.size());
  return s;
}

Summary published_position_reference() {
  Summary s;
  s.method = "published-reference";
  s.metric = "position_mm";
  s.unit = "mm";
  s.mean = 0.031;
  s.stddev = 0.025;
  s.p95 = 0.071;
  s.p99 = 0.107;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.min = s.q1 = s.median = s.q3 = s.max = s.whisker_low = s.whisker_high = s.outlier_fraction = nan;
  s.reference = true;
  return s;
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string summary_csv_header() {
  return "method,metric,unit,count,mean,stddev,min,q1,median,q3,p95,p99,max,whisker_low,whisker_high,"
         "outlier_fraction,reference";
}

std::string summary_csv_row(const Summary& s) {
  std::ostringstream o;
  o << s.method << ',' << s.metric << ',' << s.unit << ',' << s.count;
  for (double v : {s.mean, s.stddev, s.min, s.q1, s.median, s.q3, s.p95, s.p99, s.max, s.whisker_low, s.whisker_high,
                   s.outlier_fraction})
    o << ',' << fmt_double(v);
  o << ',' << (s.reference ? 1 : 0);
  return o.str();
}

std::string summary_csv(const std::vector<Summary>& rows) {
  std::string out = summary_csv_header() + "\n";
  for (const auto& s : rows) out += summary_csv_row(s) + "\n";
  return out;
}

std::vector<Summary> parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(bool(std::getline(in, line)) && line == summary_csv_header(), ErrorCode::Format,
          "summary CSV header mismatch");
  std::vector<Summary> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    require(f.size() == 17, ErrorCode::Format, "summary CSV row needs 17 fields");
    auto num = [&](int i) {
      try {
        return f[i] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[i]);
      } catch (const std::exception&) {
        fail(ErrorCode::Format, "summary CSV field '" + f[i] + "' is not a number");
      }
    };
    Summary s;
    s.method = f[0];
    s.metric = f[1];
    s.unit = f[2];
    s.count = static_cast<std::size_t>(num(3));
    s.mean = num(4);
    s.stddev = num(5);
    s.min = num(6);
    s.q1 = num(7);
    s.median = num(8);
    s.q3 = num(9);
    s.p95 = num(10);
    s.p99 = num(11);
    s.max = num(12);
    s.whisker_low = num(13);
    s.whisker_high = num(14);
    s.outlier_fraction = num(15);
    s.reference = f[16] == "1";
    out.push_back(s);
  }
  return out;
}

}  // namespace xpose
