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

// Standard-pose patches: the image is resampled so that the estimated
// instrument origin sits at a fixed anchor pixel and its forward direction runs
// along the patch +x axis.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xpose/geometry.hpp"
#include "xpose/renderer.hpp"
#include "xpose/rng.hpp"

namespace xpose {

constexpr int kPatchWidth = 92;
constexpr int kPatchHeight = 48;

/// (30, 24) for instruments whose body lies ahead of the origin, (61, 24)
/// for mirrored layouts.
Vec2 patch_anchor(bool mirrored);

/// Patch pixel p maps to image pixel center + R(alpha) (p - anchor).
struct CropTransform {
  Vec2 center = Vec2::Zero();
  double alpha_deg = 0.0;
  Vec2 anchor = patch_anchor(false);

  Vec2 to_image(const Vec2& patch_px) const;
  Vec2 to_patch(const Vec2& image_px) const;
};

struct Patch {
  int width = kPatchWidth;
  int height = kPatchHeight;
  std::vector<double> pixels;  // row-major, [0, 1]
  CropTransform crop;
  Pose estimate;
  int source_index = -1;

  double at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

/// Bilinear resampling of the image into patch raster without normalization.
std::vector<double> sample_patch_raw(const Image2D& image, const CropTransform& crop, int width = kPatchWidth,
                                     int height = kPatchHeight);

/// Min-max normalization to [0, 1]; a constant input maps to zeros.
void normalize_minmax(std::vector<double>& pixels);

/// Throws OutOfRange when the estimate position lies outside the image.
Patch extract_patch(const Image2D& image, const Pose& estimate, const Vec2& anchor, int source_index = -1);

struct AugmentationSpec {
  double delta_x_initial_mm = 2.5;
  double delta_alpha_initial_deg = 10.0;

  void validate() const;
};

struct InitialOffset {
  Vec2 delta_mm = Vec2::Zero();  // image-plane offset at the instrument depth
  double delta_alpha_deg = 0.0;
};

/// Radius ~ U(0, dx), direction ~ U(0, 360), angle ~ N(0, dalpha^2).
InitialOffset draw_initial_offset(const AugmentationSpec& spec, Rng& rng);

/// Applies an offset to a pose: mm are converted to pixels at `depth_mm`.
/// Projection angle and depth are carried over unchanged.
Pose apply_offset(const Pose& pose, const InitialOffset& off, const ProjectionGeometry& geom, double depth_mm);

/// Interleaved (x0, y0, ..., x5, y5) with u' = (u - c_u) / c_u and
/// v' = (v - c_v) / c_v where c = ((W - 1) / 2, (H - 1) / 2).
std::array<double, 12> normalize_keypoints(const KeypointSet& patch_kps, int width = kPatchWidth,
                                           int height = kPatchHeight);
/// Inverse affine map followed by the inverse crop: returns image pixels.
KeypointSet unnormalize_keypoints(const std::array<double, 12>& values, const CropTransform& crop,
                                  int width = kPatchWidth, int height = kPatchHeight);

KeypointSet to_patch_coords(const KeypointSet& image_kps, const CropTransform& crop);

/// Training sample: normalized patch plus its regression target.
struct PatchSample {
  std::vector<float> pixels;   // kPatchWidth * kPatchHeight
  std::vector<double> target;  // 12 normalized keypoint values
  int record = -1;
  Pose estimate;
};

// Archive layout: `patches.bin` holds float32 little-endian patches back to
// back; `index.jsonl` holds one line per patch with its record id, estimate and
// targets.
void save_patch_archive(const std::vector<PatchSample>& samples, const std::filesystem::path& dir);
std::vector<PatchSample> load_patch_archive(const std::filesystem::path& dir);

}  // namespace xpose
