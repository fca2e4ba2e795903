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

#include <span>

namespace xpose {

/// Mean normalized cross-correlation of the horizontal and vertical
/// central-difference gradients (interior pixels). Directions whose gradient
/// has zero variance in either image are skipped; with none left the score is 0.
double gradient_correlation(std::span<const double> a, std::span<const double> b, int width, int height);

/// Histogram mutual information in nats using `bins` equal-width bins shared
/// by both images over their joint [min, max]. Exactly symmetric in (a, b).
double mutual_information(std::span<const double> a, std::span<const double> b, int bins = 32);

}  // namespace xpose
