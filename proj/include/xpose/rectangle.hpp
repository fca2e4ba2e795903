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

// Toy orientation task: a dark 15 x 9 px rectangle with two rounded corners
// on its front end, drawn on a light 30 x 30 image. Used to compare a single
// angle output against regressing the two end points.

#include <array>
#include <cstdint>
#include <vector>

#include "xpose/geometry.hpp"
#include "xpose/nn.hpp"

namespace xpose {

struct RectangleShape {
  int image_size = 30;
  double length = 15.0;
  double width = 9.0;
  double corner_radius = 4.0;  // front corners only
  int supersample = 4;         // per axis
};

struct RectangleSample {
  std::vector<double> pixels;  // row-major, background 1, rectangle 0
  Vec2 center;
  double angle_deg = 0.0;               // [0, 360), from +x toward +y
  std::array<Vec2, 2> endpoints;        // front, back: center +- length/2 * (cos, sin)
};

/// Centers are uniform over the region where the rectangle stays inside the
/// image; angles uniform in [0, 360).
std::vector<RectangleSample> make_rectangle_dataset(int count, std::uint64_t seed, const RectangleShape& shape = {});

RectangleSample render_rectangle(const Vec2& center, double angle_deg, const RectangleShape& shape = {});

/// Angle implied by the endpoint labels (front minus back).
double endpoint_angle(const std::array<Vec2, 2>& endpoints);

/// Network targets: direct -> angle / 180 - 1; indirect -> endpoints mapped
/// to [-1, 1] per axis.
std::vector<double> rectangle_target(const RectangleSample& s, nn::Head head, const RectangleShape& shape = {});
/// Inverse of rectangle_target for a prediction row.
double rectangle_angle_from_output(const std::vector<double>& out, nn::Head head, const RectangleShape& shape = {});

nn::Dataset to_nn_dataset(const std::vector<RectangleSample>& samples, nn::Head head,
                          const RectangleShape& shape = {});

/// Simplified network: 2 blocks x 2 conv layers, 3 dense layers.
nn::ConvNetConfig rectangle_network(nn::Head head, int base_channels = 8, int fc_nodes = 64,
                                    const RectangleShape& shape = {});

struct RectangleRun {
  nn::Head head = nn::Head::Indirect;
  std::uint64_t seed = 0;
  std::vector<double> true_angles;
  std::vector<double> abs_errors_deg;  // |angle_error(pred, truth)|
  nn::TrainResult training;
};

RectangleRun run_rectangle(const nn::ConvNetConfig& net_cfg, const nn::TrainConfig& train_cfg,
                           const std::vector<RectangleSample>& train_set, const std::vector<RectangleSample>& test_set,
                           const RectangleShape& shape = {});

}  // namespace xpose
