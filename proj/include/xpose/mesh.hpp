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
#include <filesystem>
#include <string>
#include <vector>

#include "xpose/geometry.hpp"
#include "xpose/volume.hpp"

namespace xpose {

enum class InstrumentKind { Screw, Drill, Robot };

const char* to_string(InstrumentKind k);
InstrumentKind instrument_kind_from_string(const std::string& s);

/// Drill and robot carry their body behind the origin, the screw in front.
inline bool layout_mirrored(InstrumentKind k) { return k != InstrumentKind::Screw; }

struct InstrumentParams {
  double diameter_mm = 3.0;
  double robot_bend_deg = 0.0;  // robot only, [-30, 30]
  int segments = 32;            // facets around the axis
};

/// Triangle mesh in mm. Each component (a contiguous triangle range) is a
/// closed, consistently oriented surface; components may overlap and are
/// combined by union during voxelization.
struct InstrumentMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<std::size_t, 2>> components;  // [first, last) triangle ranges
  Vec3 origin = Vec3::Zero();
  Vec3 main_axis = Vec3::UnitX();
  InstrumentKind kind = InstrumentKind::Screw;
  double robot_bend_deg = 0.0;

  Box3 bounding_box() const;
  /// True when every edge of every component is shared by exactly two of its
  /// triangles with opposite orientation.
  bool is_watertight() const;
  /// Signed volume via the divergence theorem (sum over components).
  double enclosed_volume() const;
};

/// Procedural stand-ins: the mesh frame puts the origin at (0,0,0) with the
/// main axis along +x. Screw: head-first body ahead of the origin; drill and
/// robot: tip at the origin with the body behind it.
InstrumentMesh make_instrument(InstrumentKind kind, const InstrumentParams& params = {});

/// Closed axis-aligned box as a single component (tests, calibration).
InstrumentMesh make_box_mesh(const Vec3& lo, const Vec3& hi);
/// UV sphere as a single component.
InstrumentMesh make_sphere_mesh(const Vec3& center, double radius, int segments = 48, int rings = 24);

/// Rigid transform v -> R v + t. Throws InvalidArgument when R is not a
/// proper rotation (orthonormal to 1e-9 with det +1).
InstrumentMesh transform_mesh(const InstrumentMesh& mesh, const Vec3& position, const Mat3& rotation);

struct CombineResult {
  Volume volume;
  std::size_t voxels_set = 0;
  std::vector<std::string> warnings;
};

/// Sets every voxel whose center lies inside the mesh to `mu_instrument`
/// (override); other voxels are untouched. Inside-ness is decided per
/// component by crossing parity along +z and unioned across components.
CombineResult voxelize_and_combine(const Volume& volume, const InstrumentMesh& mesh, double mu_instrument,
                                   unsigned threads = 1);

void save_off(const InstrumentMesh& mesh, const std::filesystem::path& path);
/// Loads an OFF file as a single component.
InstrumentMesh load_off(const std::filesystem::path& path);

}  // namespace xpose
