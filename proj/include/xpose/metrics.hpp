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

#pragma once

#include <string>
#include <vector>

#include "xpose/geometry.hpp"

namespace xpose {

struct ErrorReport {
  double position_mm = 0.0;  // reprojection distance at the true depth
  double position_px = 0.0;
  double forward_angle_deg = 0.0;  // |angle_error|
  double forward_angle_signed_deg = 0.0;
  double projection_angle_deg = 0.0;  // ||tau_pred| - |tau_true||
  double depth_mm = 0.0;
  double depth_signed_mm = 0.0;  // predicted - true
  bool cos_tau_clamped = false;
  bool cos_tau_out_of_range = false;
  bool tau_beyond_validity = false;
};

/// Pure function of (predicted, truth, geometry); the RPD uses the truth depth.
ErrorReport compute_errors(const Pose& predicted, const Pose& truth, const ProjectionGeometry& geom,
                           double tau_validity_limit_deg = 80.0);

/// Linear-interpolation percentile (Hyndman-Fan type 7) of ascending data.
double percentile_sorted(const std::vector<double>& sorted, double p);

/// Box statistics use the 1.5 IQR whisker rule: whiskers end at the most
/// extreme values inside [q1 - 1.5 IQR, q3 + 1.5 IQR]; the rest are outliers.
struct Summary {
  std::string method;
  std::string metric;
  std::string unit;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  double outlier_fraction = 0.0;
  bool reference = false;  // published values, not measured
};

Summary summarize(const std::string& method, const std::string& metric, const std::string& unit,
                  std::vector<double> values);

/// Published position-error row used for context in reports (mean 0.031 mm,
/// sd 0.025 mm, 95 % below 0.071 mm, 99 % below 0.107 mm).
Summary published_position_reference();

std::string summary_csv_header();
std::string summary_csv_row(const Summary& s);
std::string summary_csv(const std::vector<Summary>& rows);
std::vector<Summary> parse_summary_csv(const std::string& text);

/// %.17g formatting used by every CSV writer.
std::string fmt_double(double v);

}  // namespace xpose
