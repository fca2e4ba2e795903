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

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include <Eigen/Geometry>

#include "xpose/geometry.hpp"

namespace xpose {

using Box3 = Eigen::AlignedBox3d;

/// Dense attenuation grid (mu in 1/mm), x fastest, z slowest. `origin` is the
/// world position (mm) of the center of voxel (0,0,0); axes are world-aligned.
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::vector<float> data;

  static Volume zeros(std::array<int, 3> dims, const Vec3& spacing, const Vec3& origin);

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  float at(int i, int j, int k) const { return data[index(i, j, k)]; }
  float& at(int i, int j, int k) { return data[index(i, j, k)]; }
  Vec3 voxel_center(int i, int j, int k) const {
    return origin + spacing.cwiseProduct(Vec3(i, j, k));
  }
  /// Union of voxel cells.
  Box3 extent() const;

  /// Trilinear interpolation between voxel centers. Positions inside the
  /// extent but beyond the outermost centers use the edge value; positions
  /// outside the extent read 0.
  double sample(const Vec3& p) const {
    double idx[3];
    int i0[3];
    double t[3];
    for (int a = 0; a < 3; ++a) {
      idx[a] = (p[a] - origin[a]) / spacing[a];
      if (!(idx[a] >= -0.5 && idx[a] <= dims[a] - 0.5)) return 0.0;
      double f = std::min(std::max(idx[a], 0.0), static_cast<double>(dims[a] - 1));
      int b = static_cast<int>(f);
      if (b > dims[a] - 2) b = std::max(0, dims[a] - 2);
      i0[a] = b;
      t[a] = dims[a] > 1 ? f - b : 0.0;
    }
    const int sx = dims[0] > 1 ? 1 : 0;
    const std::size_t sy = dims[1] > 1 ? static_cast<std::size_t>(dims[0]) : 0;
    const std::size_t sz = dims[2] > 1 ? static_cast<std::size_t>(dims[0]) * dims[1] : 0;
    const float* c = data.data() + index(i0[0], i0[1], i0[2]);
    const double c00 = c[0] + t[0] * (c[sx] - c[0]);
    const double c10 = c[sy] + t[0] * (c[sy + sx] - c[sy]);
    const double c01 = c[sz] + t[0] * (c[sz + sx] - c[sz]);
    const double c11 = c[sz + sy] + t[0] * (c[sz + sy + sx] - c[sz + sy]);
    const double c0 = c00 + t[1] * (c10 - c00);
    const double c1 = c01 + t[1] * (c11 - c01);
    return c0 + t[2] * (c1 - c0);
  }

  void validate() const;
};

/// Node-aligned trilinear upsampling: spacing / factor, dims (n - 1) * factor + 1,
/// original voxel centers are kept as nodes. factor in {1, 2, 4}.
Volume interpolate_volume(const Volume& v, int factor);

/// Same upsampling restricted to the nodes inside `box` (zero where the box
/// leaves the source extent). Used to build fine local inserts.
Volume interpolate_region(const Volume& v, int factor, const Box3& box);

/// JSON header + sibling little-endian float32 payload (`<stem>.raw`).
void save_volume(const Volume& v, const std::filesystem::path& header_path);
Volume load_volume(const std::filesystem::path& header_path);

}  // namespace xpose
