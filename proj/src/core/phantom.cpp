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

#include "xpose/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Geometry>

#include "xpose/errors.hpp"
#include "xpose/rng.hpp"

namespace xpose {

namespace {

Volume centered_grid(const PhantomShape& shape) {
  require(shape.dims >= 2, ErrorCode::InvalidArgument, "phantom dims must be >= 2");
  require(shape.spacing_mm > 0.0, ErrorCode::InvalidArgument, "phantom spacing must be positive");
  const double half = 0.5 * (shape.dims - 1) * shape.spacing_mm;
  return Volume::zeros({shape.dims, shape.dims, shape.dims}, Vec3::Constant(shape.spacing_mm), Vec3::Constant(-half));
}

std::uint64_t preset_tag(const std::string& preset) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : preset) h = (h ^ c) * 1099511628211ULL;
  return h;
}

/// Smoothstep-interpolated value noise on a seeded integer lattice.
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, double cell_mm) : seed_(seed), cell_(cell_mm) {}

  double operator()(const Vec3& p) const {
    const Vec3 q = p / cell_;
    const Eigen::Vector3d f = q.array().floor();
    const Eigen::Vector3d t = q - f;
    const Eigen::Vector3d s = t.array() * t.array() * (3.0 - 2.0 * t.array());
    const long ix = static_cast<long>(f.x()), iy = static_cast<long>(f.y()), iz = static_cast<long>(f.z());
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const double w = (dx ? s.x() : 1.0 - s.x()) * (dy ? s.y() : 1.0 - s.y()) * (dz ? s.z() : 1.0 - s.z());
      acc += w * lattice(ix + dx, iy + dy, iz + dz);
    }
    return acc;
  }

 private:
  double lattice(long x, long y, long z) const {
    const std::uint64_t h = derive_seed(seed_, {static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y),
                                                static_cast<std::uint64_t>(z)});
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
  }
  std::uint64_t seed_;
  double cell_;
};

void fill(Volume& v, const std::function<double(const Vec3&)>& mu) {
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i)
        v.at(i, j, k) = static_cast<float>(std::clamp(mu(v.voxel_center(i, j, k)), 0.0, 0.1));
}

}  // namespace

std::vector<SlabLayer> layered_slab_layers(std::uint64_t seed, const PhantomShape& shape) {
  constexpr int kLayers = 8;
  require(shape.dims >= kLayers, ErrorCode::InvalidArgument, "layered-slab needs at least 8 slices");
  Rng rng(derive_seed(seed, {preset_tag("layered-slab")}));
  std::uniform_int_distribution<int> numerator(20, 200);
  const int base = shape.dims / kLayers;
  std::vector<SlabLayer> layers;
  int z = 0;
  for (int l = 0; l < kLayers; ++l) {
    const int thickness = (l == kLayers - 1) ? shape.dims - z : base;
    SlabLayer layer;
    layer.first_slice = z;
    layer.last_slice = z + thickness - 1;
    // Multiples of 1/4096 so the float payload and the table agree exactly.
    const int m = (l == 0 || l == kLayers - 1) ? 328 : numerator(rng);
    layer.mu = m / 4096.0;
    layers.push_back(layer);
    z += thickness;
  }
  return layers;
}

Volume build_phantom(std::uint64_t seed, const std::string& preset, const PhantomShape& shape) {
  Volume v = centered_grid(shape);
  const double half_extent = 0.5 * shape.dims * shape.spacing_mm;

  if (preset == "shell-sphere") {
    const double outer = 0.9 * half_extent;
    const double inner = outer - kShellThicknessMm;
    fill(v, [&](const Vec3& p) {
      const double r = p.norm();
      if (r > outer) return 0.0;
      return r >= inner ? kShellMu : kShellInteriorMu;
    });
  } else if (preset == "layered-slab") {
    for (const auto& layer : layered_slab_layers(seed, shape))
      for (int k = layer.first_slice; k <= layer.last_slice; ++k)
        for (int j = 0; j < v.dims[1]; ++j)
          for (int i = 0; i < v.dims[0]; ++i) v.at(i, j, k) = static_cast<float>(layer.mu);
  } else if (preset == "perlin-bone") {
    const std::uint64_t s = derive_seed(seed, {preset_tag(preset)});
    const ValueNoise tissue(derive_seed(s, {1}), 9.0);
    const ValueNoise bone(derive_seed(s, {2}), 6.0);
    const Vec3 semi = half_extent * Vec3(0.9, 0.8, 0.85);
    constexpr double kCortical = 2.5;
    fill(v, [&](const Vec3& p) {
      const double e = p.cwiseQuotient(semi).norm();
      if (e > 1.0) return 0.0;
      // approximate distance to the ellipsoid surface along the radial direction
      const double depth_mm = (1.0 - e) * semi.minCoeff();
      if (depth_mm < kCortical) return 0.07;
      const double b = bone(p);
      if (b > 0.62) return 0.045 + 0.03 * (b - 0.62);
      return 0.012 + 0.012 * tissue(p);
    });
  } else {
    fail(ErrorCode::InvalidArgument, "unknown phantom preset '" + preset + "'");
  }
  return v;
}

void ValidityPolygons::validate() const {
  for (const auto* poly : {&lower, &upper}) {
    require(poly->size() >= 3, ErrorCode::InvalidArgument, "validity polygon needs >= 3 vertices");
    Vec3 n = Vec3::Zero();
    for (std::size_t i = 0; i < poly->size(); ++i) n += (*poly)[i].cross((*poly)[(i + 1) % poly->size()]);
    require(n.norm() > 0.0, ErrorCode::InvalidArgument, "validity polygon has zero area");
  }
}

ValidityPolygons phantom_validity_polygons(const Volume& v) {
  const Box3 b = v.extent();
  auto face = [&](double z) {
    return std::vector<Vec3>{{b.min().x(), b.min().y(), z},
                             {b.max().x(), b.min().y(), z},
                             {b.max().x(), b.max().y(), z},
                             {b.min().x(), b.max().y(), z}};
  };
  return {face(b.min().z()), face(b.max().z())};
}

std::vector<NominalPlacement> nominal_placements(const std::string& preset, std::uint64_t seed,
                                                 const PhantomShape& shape) {
  require(std::find(phantom_presets().begin(), phantom_presets().end(), preset) != phantom_presets().end(),
          ErrorCode::InvalidArgument, "unknown phantom preset '" + preset + "'");
  Rng rng(derive_seed(seed, {preset_tag(preset), 0xA11C40ULL}));
  const double reach = 0.22 * shape.dims * shape.spacing_mm;  // ~14 mm for the default grid
  std::vector<NominalPlacement> out;
  for (int id = 0; id < 20; ++id) {
    const double side = id < 10 ? -1.0 : 1.0;
    NominalPlacement p;
    p.id = id;
    p.side = id < 10 ? "left" : "right";
    const int slot = id % 10;
    p.position = Vec3(side * uniform(rng, 0.4, 1.0) * reach, (-1.0 + 2.0 * slot / 9.0) * 0.8 * reach,
                      uniform(rng, -0.6, 0.6) * reach);
    // Main axis points laterally outward with a moderate tilt.
    const double yaw = uniform(rng, -35.0, 35.0) + (side < 0 ? 180.0 : 0.0);
    const double pitch = uniform(rng, -25.0, 25.0);
    p.rotation = (Eigen::AngleAxisd(deg2rad(yaw), Vec3::UnitZ()) * Eigen::AngleAxisd(deg2rad(pitch), Vec3::UnitY()))
                     .toRotationMatrix();
    out.push_back(p);
  }
  return out;
}

}  // namespace xpose
