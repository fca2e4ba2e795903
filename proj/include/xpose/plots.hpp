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

#include "xpose/metrics.hpp"

namespace xpose {

struct BoxPlotSeries {
  std::string label;
  Summary stats;
};

/// Standalone SVG with one box per series. Boxes span q1..q3, whiskers follow
/// the 1.5 IQR rule and each box carries its statistics as data-* attributes
/// (%.17g) so the plot can be checked programmatically.
std::string box_plot_svg(const std::string& title, const std::string& unit, const std::vector<BoxPlotSeries>& series);

}  // namespace xpose
