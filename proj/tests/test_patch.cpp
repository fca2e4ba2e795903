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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "support/stats.hpp"
#include "xpose/errors.hpp"
#include "xpose/mesh.hpp"
#include "xpose/patch.hpp"
#include "xpose/sampler.hpp"

using namespace xpose;
using namespace xpose::testing;
namespace fs = std::filesystem;

namespace {

Image2D textured_image() {
  Image2D im = Image2D::zeros(1024, 1024);
  for (int y = 0; y < 1024; ++y)
    for (int x = 0; x < 1024; ++x) im.at(x, y) = std::sin(0.05 * x) * std::cos(0.031 * y) + 0.002 * x + 1.5;
  return im;
}

Vec2 centroid(const std::vector<double>& px, int w, int h) {
  double m = 0.0, mx = 0.0, my = 0.0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double a = px[static_cast<std::size_t>(v) * w + u];
      m += a;
      mx += u * a;
      my += v * a;
    }
  return {mx / m, my / m};
}

}  // namespace

TEST(Anchor, StandardAndMirrored) {
  EXPECT_EQ(patch_anchor(false), Vec2(30, 24));
  EXPECT_EQ(patch_anchor(true), Vec2(61, 24));
}

TEST(Crop, RoundTrip) {
  Rng rng(3);
  for (int n = 0; n < 200; ++n) {
    CropTransform c{Vec2(uniform(rng, 0, 1023), uniform(rng, 0, 1023)), uniform(rng, 0, 360), patch_anchor(n % 2)};
    const Vec2 p(uniform(rng, 0, 91), uniform(rng, 0, 47));
    EXPECT_LT((c.to_patch(c.to_image(p)) - p).norm(), 1e-9);
  }
}

TEST(Extract, ZeroRotationIsAxisAlignedCrop) {
  const Image2D im = textured_image();
  const CropTransform c{Vec2(400, 300), 0.0, patch_anchor(false)};
  const auto raw = sample_patch_raw(im, c);
  for (int v = 0; v < kPatchHeight; ++v)
    for (int u = 0; u < kPatchWidth; ++u)
      ASSERT_NEAR(raw[static_cast<std::size_t>(v) * kPatchWidth + u], im.at(400 + u - 30, 300 + v - 24), 1e-12);
  const Patch p = extract_patch(im, make_pose(400, 300, 0, 0, 500), patch_anchor(false));
  auto expected = raw;
  normalize_minmax(expected);
  for (std::size_t i = 0; i < raw.size(); ++i) ASSERT_NEAR(p.pixels[i], expected[i], 1e-12);
}

TEST(Extract, HalfTurnMirrorsAboutAnchor) {
  const Image2D im = textured_image();
  const Vec2 a = patch_anchor(false);
  const auto p0 = sample_patch_raw(im, {Vec2(512, 400), 0.0, a});
  const auto p180 = sample_patch_raw(im, {Vec2(512, 400), 180.0, a});
  for (int v = 0; v < kPatchHeight; ++v)
    for (int u = 0; u < kPatchWidth; ++u) {
      const int u2 = 2 * static_cast<int>(a.x()) - u, v2 = 2 * static_cast<int>(a.y()) - v;
      if (u2 < 0 || u2 >= kPatchWidth || v2 < 0 || v2 >= kPatchHeight) continue;
      ASSERT_NEAR(p180[static_cast<std::size_t>(v) * kPatchWidth + u], p0[static_cast<std::size_t>(v2) * kPatchWidth + u2],
                  1e-6);
    }
}

TEST(Extract, ConstantImageGivesZeros) {
  Image2D im = Image2D::zeros(1024, 1024);
  std::fill(im.pixels.begin(), im.pixels.end(), 2.0);
  const Patch p = extract_patch(im, make_pose(512, 512, 37, 0, 500), patch_anchor(true));
  ASSERT_EQ(p.pixels.size(), static_cast<std::size_t>(kPatchWidth * kPatchHeight));
  for (double x : p.pixels) EXPECT_EQ(x, 0.0);
}

TEST(Extract, NormalizedRangeAndOutside) {
  const Image2D im = textured_image();
  const Patch p = extract_patch(im, make_pose(5, 5, 45, 0, 500), patch_anchor(false));
  EXPECT_EQ(*std::min_element(p.pixels.begin(), p.pixels.end()), 0.0);
  EXPECT_EQ(*std::max_element(p.pixels.begin(), p.pixels.end()), 1.0);
  try {
    extract_patch(im, make_pose(1100, 5, 0, 0, 500), patch_anchor(false));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
  }
}

TEST(Extract, ShiftEquivariance) {
  const Volume anatomy = Volume::zeros({48, 48, 48}, Vec3::Constant(1.0), Vec3::Constant(-23.5));
  ProjectionSetup s;
  s.rotations = {10.0, 0.0, 0.0};
  const Mat3 world_from_cam = s.camera_from_world().transpose();
  const double alpha = 35.0;
  const Vec3 axis = world_from_cam * Vec3(std::cos(deg2rad(alpha)), std::sin(deg2rad(alpha)), 0);
  const Mat3 rot = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitX(), axis).toRotationMatrix();
  const InstrumentMesh placed = transform_mesh(make_instrument(InstrumentKind::Screw), Vec3::Zero(), rot);
  const Volume insert = make_instrument_insert(anatomy, placed, 0.5, 4, kInsertMarginMm);
  const Pose pose = pose_from_placement(s, Vec3::Zero(), axis);
  EXPECT_NEAR(pose.alpha, alpha, 1e-9);
  const Image2D im = render_scene_window({&anatomy, &insert}, s, {400, 400, 224, 224});
  const Vec2 fwd(std::cos(deg2rad(alpha)), std::sin(deg2rad(alpha)));
  const auto base = sample_patch_raw(im, {Vec2(pose.x, pose.y), alpha, patch_anchor(false)});
  for (double delta : {-3.0, 2.0, 4.5}) {
    const Vec2 moved = Vec2(pose.x, pose.y) + delta * fwd;
    const auto shifted = sample_patch_raw(im, {moved, alpha, patch_anchor(false)});
    const Vec2 d = centroid(shifted, kPatchWidth, kPatchHeight) - centroid(base, kPatchWidth, kPatchHeight);
    EXPECT_NEAR(d.x(), -delta, 0.5);
    EXPECT_NEAR(d.y(), 0.0, 0.5);
  }
}

TEST(Offset, RadiusBoundAndAngleSigma) {
  Rng rng(11);
  const AugmentationSpec spec;
  std::vector<double> radius, angle;
  for (int i = 0; i < 100000; ++i) {
    const InitialOffset o = draw_initial_offset(spec, rng);
    radius.push_back(o.delta_mm.norm());
    angle.push_back(o.delta_alpha_deg);
  }
  EXPECT_LE(*std::max_element(radius.begin(), radius.end()), 2.5);
  EXPECT_NEAR(sample_stddev(angle), 10.0, 0.2);
  const double p = ks_p_value(ks_statistic(radius, [](double r) { return uniform_cdf(r, 0, 2.5); }), radius.size());
  EXPECT_GT(p, 0.01);
}

TEST(Offset, DegenerateSpec) {
  Rng rng(1);
  const InitialOffset o = draw_initial_offset({1e-12, 1e-12}, rng);
  EXPECT_LT(o.delta_mm.norm(), 1e-11);
  EXPECT_LT(std::abs(o.delta_alpha_deg), 1e-10);
  EXPECT_THROW(AugmentationSpec({0.0, 10.0}).validate(), Error);
}

TEST(Offset, ApplyUsesDepth) {
  const ProjectionGeometry g;
  const Pose p = make_pose(500, 500, 350, 12, 532);
  const Pose q = apply_offset(p, {Vec2(1.0, 0.0), 20.0}, g, 532);
  EXPECT_NEAR(q.x - p.x, 1.0 / (g.d2p() * 532), 1e-9);
  EXPECT_NEAR(q.y, p.y, 1e-12);
  EXPECT_NEAR(q.alpha, 10.0, 1e-9);
  EXPECT_EQ(q.tau, p.tau);
  EXPECT_EQ(q.depth, p.depth);
}

TEST(Keypoints, NormalizationExamples) {
  KeypointSet k;
  k.points.fill(Vec2(45.5, 23.5));
  k.points[1] = Vec2(91, 47);
  k.points[2] = Vec2(0, 0);
  const auto n = normalize_keypoints(k);
  EXPECT_DOUBLE_EQ(n[0], 0.0);
  EXPECT_DOUBLE_EQ(n[1], 0.0);
  EXPECT_DOUBLE_EQ(n[2], 1.0);
  EXPECT_DOUBLE_EQ(n[3], 1.0);
  EXPECT_DOUBLE_EQ(n[4], -1.0);
  EXPECT_DOUBLE_EQ(n[5], -1.0);
}

TEST(Keypoints, UnnormalizeInvertsNormalize) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const CropTransform c{Vec2(uniform(rng, 100, 900), uniform(rng, 100, 900)), uniform(rng, 0, 360), patch_anchor(t % 2)};
    KeypointSet img;
    for (auto& p : img.points) p = c.center + Vec2(uniform(rng, -40, 40), uniform(rng, -40, 40));
    const KeypointSet back = unnormalize_keypoints(normalize_keypoints(to_patch_coords(img, c)), c);
    for (int i = 0; i < 6; ++i) EXPECT_LT((back.points[i] - img.points[i]).norm(), 1e-12 * 1024);
  }
}

TEST(Archive, RoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "xpose_test_patches";
  fs::remove_all(dir);
  std::vector<PatchSample> samples(3);
  for (int s = 0; s < 3; ++s) {
    samples[s].pixels.resize(kPatchWidth * kPatchHeight);
    for (std::size_t i = 0; i < samples[s].pixels.size(); ++i) samples[s].pixels[i] = static_cast<float>((i * (s + 1)) % 97) / 96.0f;
    samples[s].target.assign(12, 0.0);
    for (int i = 0; i < 12; ++i) samples[s].target[i] = 0.1 * i - 0.3 * s + 1.0 / 3.0;
    samples[s].record = 10 + s;
    samples[s].estimate = make_pose(100 + s, 200, 45.25, 3, 500);
  }
  save_patch_archive(samples, dir);
  const auto back = load_patch_archive(dir);
  ASSERT_EQ(back.size(), 3u);
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(back[s].pixels, samples[s].pixels);
    EXPECT_EQ(back[s].target, samples[s].target);
    EXPECT_EQ(back[s].record, samples[s].record);
    EXPECT_EQ(back[s].estimate.x, samples[s].estimate.x);
    EXPECT_EQ(back[s].estimate.alpha, samples[s].estimate.alpha);
  }
}
