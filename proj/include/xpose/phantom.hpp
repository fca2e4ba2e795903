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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xpose/geometry.hpp"
#include "xpose/volume.hpp"

namespace xpose {

// Procedural attenuation phantoms standing in for head CTs. All presets are
// centered on the world origin and are pure functions of (preset, seed).

inline const std::vector<std::string>& phantom_presets() {
  static const std::vector<std::string> names{"shell-sphere", "layered-slab", "perlin-bone"};
  return names;
}

struct PhantomShape {
  int dims = 64;             // voxels per axis
  double spacing_mm = 1.0;   // isotropic
};

Volume build_phantom(std::uint64_t seed, const std::string& preset, const PhantomShape& shape = {});

// shell-sphere constants (mu in 1/mm)
constexpr double kShellMu = 0.05;
constexpr double kShellInteriorMu = 0.01;
constexpr double kShellThicknessMm = 3.0;

struct SlabLayer {
  int first_slice = 0;  // z index, inclusive
  int last_slice = 0;   // z index, inclusive
  double mu = 0.0;      // exactly representable as float
};

/// Layer table of the layered-slab preset: equal-thickness z layers with
/// seeded attenuation and dense outer layers acting as cortical shell.
std::vector<SlabLayer> layered_slab_layers(std::uint64_t seed, const PhantomShape& shape = {});

/// Planar 3-D loops bounding the missing-data regions of a phantom (the
/// bottom and top faces of its extent, like the limited slab of a CT scan).
struct ValidityPolygons {
  std::vector<Vec3> lower;
  std::vector<Vec3> upper;

  void validate() const;
};

ValidityPolygons phantom_validity_polygons(const Volume& v);

/// Nominal instrument placement. `rotation` maps the instrument mesh frame
/// (main axis +x) into the world.
struct NominalPlacement {
  int id = 0;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  std::string side;  // "left" | "right"
};

/// 20 anchor placements, 10 per lateral side, deterministic in (preset, seed).
std::vector<NominalPlacement> nominal_placements(const std::string& preset, std::uint64_t seed,
                                                 const PhantomShape& shape = {});

}  // namespace xpose
