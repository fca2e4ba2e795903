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

// Perspective ray-cast projection of attenuation volumes.
//
// Camera frame: source at the origin, projection normal along +z, detector
// plane at z = SDD with image x along camera +x and image y along camera +y.
// The base arrangement looks along world +x (image x = world +y, image
// y = world +z). Rotations about the object center are Euler Z-Y-Z in degrees,
// composed as Rz(first) * Ry(second) * Rz(third) acting on that arrangement.

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "xpose/geometry.hpp"
#include "xpose/phantom.hpp"
#include "xpose/volume.hpp"

namespace xpose {

struct ProjectionSetup {
  ProjectionGeometry geom;
  double source_object_distance = 544.205;  // mm, 0 < d_SOD < SDD
  /// Polar displacement of the object center orthogonal to the projection
  /// direction, expressed where it lands on the detector plane (mm).
  double offset_r = 0.0;
  double offset_phi = 0.0;                         // degrees
  std::array<double, 3> rotations{0.0, 0.0, 0.0};  // Z-Y-Z degrees
  Vec3 object_center = Vec3::Zero();               // world mm

  void validate() const;
  /// Rotation taking world vectors into the camera frame.
  Mat3 camera_from_world() const;
  /// Object center in camera coordinates.
  Vec3 object_in_camera() const;
  Vec3 to_camera(const Vec3& world) const;
  Vec3 source_world() const;
  /// Unit world direction of the ray through continuous pixel (x, y).
  Vec3 ray_direction(double px, double py) const;
};

struct PointProjection {
  Vec2 pixel;
  double depth = 0.0;  // mm along the projection normal
};

/// Throws OutOfRange for points at or behind the source plane.
PointProjection project_point(const ProjectionSetup& setup, const Vec3& p);

/// Forward angle and projection angle (degrees) of a world direction at the
/// camera: alpha = atan2(n_y, n_x), tau = asin(n_z).
std::pair<double, double> direction_angles(const ProjectionSetup& setup, const Vec3& world_dir);

/// Pixel window on the detector; pixel (x0 + i, y0 + j) is stored at i + j * width.
struct Image2D {
  int width = 0;
  int height = 0;
  int x0 = 0;
  int y0 = 0;
  std::vector<double> pixels;

  static Image2D zeros(int width, int height, int x0 = 0, int y0 = 0);
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y - y0) * width + (x - x0)]; }
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y - y0) * width + (x - x0)]; }
  bool contains(int x, int y) const { return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height; }
  /// Bilinear sample in detector coordinates; 0 outside the window.
  double sample(double x, double y) const;
};

struct Radiograph {
  Image2D image;  // full detector
  ProjectionSetup setup;
};

struct PixelWindow {
  int x0 = 0, y0 = 0, width = 0, height = 0;
};

/// Default anatomy sampling step: half the smallest voxel spacing.
double default_step(const Volume& v);

/// Line integral of mu through every pixel center of `window` (midpoint rule,
/// `step_mm` upper bound on the sample spacing). Rays missing the volume read 0.
Image2D project_volume_window(const Volume& v, const ProjectionSetup& setup, double step_mm,
                              const PixelWindow& window, unsigned threads = 1);

Radiograph project_volume(const Volume& v, const ProjectionSetup& setup, double step_mm, unsigned threads = 1);

/// Anatomy plus a fine local insert that replaces the anatomy inside its
/// extent. Rendered as anatomy integral + insert-box correction
/// sum((insert - anatomy) ds), so the anatomy image can be reused.
struct Scene {
  const Volume* anatomy = nullptr;
  const Volume* insert = nullptr;  // optional
  double anatomy_step = 0.0;       // 0: default_step(anatomy)
  double insert_step = 0.0;        // 0: default_step(insert)
};

/// Adds the insert correction of `scene` onto `image` (window coordinates).
void add_insert_correction(const Scene& scene, const ProjectionSetup& setup, Image2D& image, unsigned threads = 1);

Image2D render_scene_window(const Scene& scene, const ProjectionSetup& setup, const PixelWindow& window,
                            unsigned threads = 1);
Radiograph render_scene(const Scene& scene, const ProjectionSetup& setup, unsigned threads = 1);

/// Even-odd containment with the boundary counting as inside.
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);
double distance_to_polygon_boundary(const Vec2& p, const std::vector<Vec2>& poly);

/// False iff the projected instrument position lies inside either projected
/// polygon dilated by the margin (projected at the instrument depth). Any
/// degenerate projection (zero area, vertex behind the source) is invalid.
bool validity_check(const ProjectionSetup& setup, const Vec3& instrument_position, const ValidityPolygons& polys,
                    double margin_mm = 5.0);

/// 16-bit binary PGM normalized to [raw_min, raw_max] plus JSON sidecar
/// (`<stem>.json`) carrying the raw range and the full setup.
void save_radiograph(const Radiograph& r, const std::filesystem::path& pgm_path);
Radiograph load_radiograph(const std::filesystem::path& pgm_path);

}  // namespace xpose
