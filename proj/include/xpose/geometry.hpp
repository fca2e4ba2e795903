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

// Pose <-> keypoint geometry.
//
// Pixel convention: x grows with the detector column index, y grows with the
// row index, pixel centers sit on integer coordinates. The forward angle alpha
// is measured from +x toward +y in degrees.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace xpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Maps any angle in degrees to [0, 360).
double wrap_degrees_360(double deg);

/// Signed minimal difference a - b in (-180, 180].
double angle_error(double a_deg, double b_deg);

/// (x, y, alpha, tau, depth): detector pixel position, forward angle,
/// projection angle and source-to-instrument depth along the projection normal.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double alpha = 0.0;  // degrees, [0, 360)
  double tau = 0.0;    // degrees, [-90, 90]
  double depth = 1.0;  // mm, > 0
};

/// Validates the pose invariants and normalizes alpha. Throws InvalidArgument.
Pose make_pose(double x, double y, double alpha_deg, double tau_deg, double depth_mm);

struct ProjectionGeometry {
  double source_detector_distance = 1064.0;     // mm
  double pixel_spacing = 300.0 / 1024.0;        // mm / pixel at the detector
  int width = 1024;
  int height = 1024;

  /// Pixel spacing over source-detector distance (1/pixel).
  double d2p() const { return pixel_spacing / source_detector_distance; }
  /// Continuous pixel coordinate of the detector center.
  Vec2 center() const { return {0.5 * (width - 1), 0.5 * (height - 1)}; }
  void validate() const;

  /// 300 mm x 300 mm detector at 1024 x 1024, SDD 1064 mm.
  static ProjectionGeometry c_arm_default() { return {}; }
};

/// Six instrument-local points (mm) in cross shape; the order carries identity.
struct KeypointLayout {
  std::array<Vec2, 6> points;
  std::vector<int> axis_indices;  // y_key == 0
  std::vector<int> perp_indices;  // x_key == 0

  void validate() const;

  /// Axis points at x in {-3,-1,1,3}, perpendicular points at y in {-2,2}.
  /// `mirrored` flips the sign of x_key (instruments whose body lies behind
  /// the origin).
  static KeypointLayout standard(bool mirrored = false);
};

struct KeypointSet {
  std::array<Vec2, 6> points;
};

/// Weak-perspective keypoint placement. Throws OutOfRange when |tau| >= 90.
KeypointSet keypoints_from_pose(const Pose& pose, const KeypointLayout& layout,
                                const ProjectionGeometry& geom);

struct Line2 {
  Vec2 point;      // centroid
  Vec2 direction;  // unit
};

/// Total-least-squares line. The direction is oriented so that it points
/// from the first toward the last input point. Throws Degenerate for fewer
/// than two points or coincident points.
Line2 fit_line(std::span<const Vec2> points);

struct PoseRecovery {
  Pose pose;
  double cos_tau_raw = 1.0;
  bool cos_tau_clamped = false;       // ratio in (1, 1 + 1e-6] snapped to 1
  bool cos_tau_out_of_range = false;  // ratio beyond 1 + 1e-6, tau forced to 0
};

constexpr double kCosTauClampTolerance = 1e-6;

/// Inverts keypoints_from_pose: line intersection for (x, y), axis slope for
/// alpha, extreme perpendicular points for depth, extreme axis points for
/// |tau|. The returned tau is never negative.
PoseRecovery pose_from_keypoints(const KeypointSet& kps, const KeypointLayout& layout,
                                 const ProjectionGeometry& geom);

}  // namespace xpose
