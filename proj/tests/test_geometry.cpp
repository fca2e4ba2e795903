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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "xpose/errors.hpp"
#include "xpose/geometry.hpp"

using namespace xpose;

namespace {

// Scalar evaluation of the weak-perspective keypoint formula.
Vec2 keypoint_oracle(double x, double y, double alpha_deg, double tau_deg, double depth, double xk, double yk,
                     double spacing, double sdd) {
  const double s = sdd / (spacing * depth);
  const double a = alpha_deg * 3.14159265358979323846 / 180.0;
  const double t = tau_deg * 3.14159265358979323846 / 180.0;
  const double u = xk * std::cos(t), v = yk;
  return {x + s * (std::cos(a) * u - std::sin(a) * v), y + s * (std::sin(a) * u + std::cos(a) * v)};
}

Pose random_pose(std::mt19937_64& rng, double tau_max = 80.0) {
  std::uniform_real_distribution<double> ux(50.0, 970.0), ua(0.0, 360.0), ut(-tau_max, tau_max), ud(360.0, 730.0);
  return make_pose(ux(rng), ux(rng), ua(rng), ut(rng), ud(rng));
}

}  // namespace

TEST(Geometry, D2pIsSpacingOverDistance) {
  const ProjectionGeometry g;
  EXPECT_EQ(g.d2p(), g.pixel_spacing / g.source_detector_distance);
  EXPECT_DOUBLE_EQ(g.pixel_spacing, 300.0 / 1024.0);
  EXPECT_DOUBLE_EQ(g.source_detector_distance, 1064.0);
  ProjectionGeometry bad;
  bad.pixel_spacing = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Geometry, MakePoseValidatesAndWraps) {
  EXPECT_DOUBLE_EQ(make_pose(0, 0, -90, 0, 10).alpha, 270.0);
  EXPECT_DOUBLE_EQ(make_pose(0, 0, 720, 0, 10).alpha, 0.0);
  EXPECT_THROW(make_pose(0, 0, 0, 0, 0.0), Error);
  EXPECT_THROW(make_pose(0, 0, 0, 91, 10), Error);
}

TEST(Geometry, AngleError) {
  EXPECT_DOUBLE_EQ(angle_error(359.0, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(angle_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(angle_error(90.0, 270.0), 180.0);
  EXPECT_DOUBLE_EQ(angle_error(270.0, 90.0), 180.0);
  EXPECT_DOUBLE_EQ(angle_error(1.0, 359.0), 2.0);
}

TEST(Geometry, AxisPointAtUnitMagnification) {
  const ProjectionGeometry g;
  const auto kps = keypoints_from_pose(make_pose(512, 512, 0, 0, 1064), KeypointLayout::standard(), g);
  // layout point 3 is (3 mm, 0)
  EXPECT_NEAR(kps.points[3].x(), 512.0 + 10.24, 1e-12);
  EXPECT_NEAR(kps.points[3].y(), 512.0, 1e-12);
}

TEST(Geometry, NinetyDegreesRotatesAxisOntoRows) {
  const ProjectionGeometry g;
  const auto kps = keypoints_from_pose(make_pose(100, 200, 90, 0, 1064), KeypointLayout::standard(), g);
  EXPECT_NEAR(kps.points[3].x(), 100.0, 1e-12);
  EXPECT_NEAR(kps.points[3].y(), 200.0 + 10.24, 1e-12);
}

TEST(Geometry, PerpendicularPointAtHalfDepth) {
  const ProjectionGeometry g;
  const auto kps = keypoints_from_pose(make_pose(300, 400, 0, 0, 532), KeypointLayout::standard(), g);
  const double expected = 2.0 * (1064.0 / ((300.0 / 1024.0) * 532.0));
  EXPECT_NEAR(kps.points[5].y() - 400.0, expected, 1e-12);
  EXPECT_NEAR(expected, 13.653333333333333, 1e-12);
  EXPECT_NEAR(kps.points[5].x(), 300.0, 1e-12);
}

TEST(Geometry, KeypointsMatchScalarOracle) {
  const ProjectionGeometry g;
  std::mt19937_64 rng(11);
  for (bool mirrored : {false, true}) {
    const KeypointLayout layout = KeypointLayout::standard(mirrored);
    for (int n = 0; n < 200; ++n) {
      const Pose p = random_pose(rng, 89.0);
      const auto kps = keypoints_from_pose(p, layout, g);
      for (int i = 0; i < 6; ++i) {
        const Vec2 o = keypoint_oracle(p.x, p.y, p.alpha, p.tau, p.depth, layout.points[i].x(), layout.points[i].y(),
                                       g.pixel_spacing, g.source_detector_distance);
        EXPECT_NEAR(kps.points[i].x(), o.x(), 1e-9);
        EXPECT_NEAR(kps.points[i].y(), o.y(), 1e-9);
      }
    }
  }
}

TEST(Geometry, RejectsGrazingProjection) {
  Pose p;
  p.x = p.y = 10;
  p.tau = 90.0;
  p.depth = 500;
  EXPECT_THROW(keypoints_from_pose(p, KeypointLayout::standard(), ProjectionGeometry{}), Error);
}

TEST(Geometry, LayoutValidation) {
  EXPECT_NO_THROW(KeypointLayout::standard().validate());
  EXPECT_NO_THROW(KeypointLayout::standard(true).validate());
  KeypointLayout bad = KeypointLayout::standard();
  bad.points[0] = Vec2(1.0, 1.0);
  EXPECT_THROW(bad.validate(), Error);
  KeypointLayout same = KeypointLayout::standard();
  same.points[4] = same.points[5];
  EXPECT_THROW(same.validate(), Error);
}

TEST(FitLine, TwoPoints) {
  const std::vector<Vec2> pts{{0, 0}, {2, 0}};
  const Line2 l = fit_line(pts);
  EXPECT_NEAR(l.point.x(), 1.0, 1e-15);
  EXPECT_NEAR(l.point.y(), 0.0, 1e-15);
  EXPECT_NEAR(l.direction.x(), 1.0, 1e-15);
  EXPECT_NEAR(l.direction.y(), 0.0, 1e-15);
}

TEST(FitLine, Diagonal) {
  const std::vector<Vec2> pts{{0, 0}, {1, 1}, {2, 2}};
  const Line2 l = fit_line(pts);
  EXPECT_NEAR(l.direction.x(), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(l.direction.y(), std::sqrt(0.5), 1e-15);
}

TEST(FitLine, MatchesClosedFormEigenvector) {
  const std::vector<Vec2> pts{{0, 0.1}, {1, -0.1}, {2, 0.1}, {3, -0.1}};
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.x() / 4;
    my += p.y() / 4;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : pts) {
    sxx += (p.x() - mx) * (p.x() - mx);
    sxy += (p.x() - mx) * (p.y() - my);
    syy += (p.y() - my) * (p.y() - my);
  }
  // Largest eigenvalue of [[sxx, sxy], [sxy, syy]] and its eigenvector.
  const double lambda = 0.5 * (sxx + syy) + std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
  Vec2 v(sxy, lambda - sxx);
  if (v.norm() < 1e-300) v = Vec2(1, 0);
  v.normalize();
  if (v.x() < 0) v = -v;
  const Line2 l = fit_line(pts);
  EXPECT_NEAR(l.direction.x(), v.x(), 1e-12);
  EXPECT_NEAR(l.direction.y(), v.y(), 1e-12);
}

TEST(FitLine, DirectionFollowsInputOrder) {
  const std::vector<Vec2> pts{{3, 3}, {2, 2}, {0, 0}};
  const Line2 l = fit_line(pts);
  EXPECT_LT(l.direction.x(), 0.0);
}

TEST(FitLine, Degenerate) {
  const std::vector<Vec2> one{{1, 1}};
  const std::vector<Vec2> same{{1, 1}, {1, 1}};
  EXPECT_THROW(fit_line(one), Error);
  EXPECT_THROW(fit_line(same), Error);
}

TEST(PoseRecovery, RoundTripThousandPoses) {
  const ProjectionGeometry g;
  std::mt19937_64 rng(2024);
  for (bool mirrored : {false, true}) {
    const KeypointLayout layout = KeypointLayout::standard(mirrored);
    for (int n = 0; n < 1000; ++n) {
      const Pose p = random_pose(rng);
      const PoseRecovery r = pose_from_keypoints(keypoints_from_pose(p, layout, g), layout, g);
      EXPECT_NEAR(r.pose.x, p.x, 1e-9);
      EXPECT_NEAR(r.pose.y, p.y, 1e-9);
      EXPECT_NEAR(angle_error(r.pose.alpha, p.alpha), 0.0, 1e-9);
      EXPECT_NEAR(r.pose.depth, p.depth, 1e-9);
      EXPECT_NEAR(r.pose.tau, std::abs(p.tau), 1e-9);
      EXPECT_GE(r.pose.tau, 0.0);
    }
  }
}

TEST(PoseRecovery, DepthFromPerpendicularPoints) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  const auto kps = keypoints_from_pose(make_pose(300, 400, 37, 0, 532), layout, g);
  const double dist = (kps.points[5] - kps.points[4]).norm();
  const double oracle = (1.0 / g.d2p()) * 4.0 / dist;
  const PoseRecovery r = pose_from_keypoints(kps, layout, g);
  EXPECT_NEAR(r.pose.depth, 532.0, 1e-9);
  EXPECT_NEAR(r.pose.depth, oracle, 1e-9);
}

TEST(PoseRecovery, SixtyDegreeProjection) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  const auto kps = keypoints_from_pose(make_pose(500, 500, 120, 60, 700), layout, g);
  const PoseRecovery r = pose_from_keypoints(kps, layout, g);
  EXPECT_NEAR(r.cos_tau_raw, 0.5, 1e-12);
  EXPECT_NEAR(r.pose.tau, 60.0, 1e-9);
  EXPECT_FALSE(r.cos_tau_clamped);
}

TEST(PoseRecovery, NegativeTauReturnsMagnitude) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  const PoseRecovery r = pose_from_keypoints(keypoints_from_pose(make_pose(500, 500, 10, -45, 700), layout, g), layout, g);
  EXPECT_NEAR(r.pose.tau, 45.0, 1e-9);
}

TEST(PoseRecovery, CosTauClampAndFlag) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  auto kps = keypoints_from_pose(make_pose(500, 500, 0, 0, 700), layout, g);
  const double cx = 0.5 * (kps.points[3].x() + kps.points[0].x());
  auto stretched = [&](double factor) {
    KeypointSet s = kps;
    for (int i : layout.axis_indices) s.points[i].x() = cx + (s.points[i].x() - cx) * factor;
    return s;
  };
  const PoseRecovery small = pose_from_keypoints(stretched(1.0 + 5e-7), layout, g);
  EXPECT_TRUE(small.cos_tau_clamped);
  EXPECT_FALSE(small.cos_tau_out_of_range);
  EXPECT_EQ(small.pose.tau, 0.0);
  const PoseRecovery big = pose_from_keypoints(stretched(1.01), layout, g);
  EXPECT_TRUE(big.cos_tau_out_of_range);
  EXPECT_EQ(big.pose.tau, 0.0);
}

TEST(PoseRecovery, ParallelLinesAreDegenerate) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  KeypointSet s;
  for (int i = 0; i < 4; ++i) s.points[i] = Vec2(100 + 10 * i, 100);
  s.points[4] = Vec2(100, 110);
  s.points[5] = Vec2(120, 110);
  EXPECT_THROW(pose_from_keypoints(s, layout, g), Error);
}

TEST(GeometryProperties, DoublingDepthHalvesOffsets) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  std::mt19937_64 rng(5);
  for (int n = 0; n < 100; ++n) {
    Pose p = random_pose(rng);
    const auto a = keypoints_from_pose(p, layout, g);
    p.depth *= 2.0;
    const auto b = keypoints_from_pose(p, layout, g);
    for (int i = 0; i < 6; ++i) {
      const Vec2 da = a.points[i] - Vec2(p.x, p.y), db = b.points[i] - Vec2(p.x, p.y);
      EXPECT_NEAR((0.5 * da - db).norm(), 0.0, 1e-9);
    }
  }
}

TEST(GeometryProperties, PerpendicularArmIgnoresTau) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  const auto a = keypoints_from_pose(make_pose(400, 300, 33, 0, 600), layout, g);
  for (double tau : {-70.0, -20.0, 45.0, 80.0}) {
    const auto b = keypoints_from_pose(make_pose(400, 300, 33, tau, 600), layout, g);
    for (int i : layout.perp_indices) EXPECT_NEAR((a.points[i] - b.points[i]).norm(), 0.0, 1e-12);
  }
}

TEST(GeometryProperties, NoiseGrowsMedianErrorMonotonically) {
  const ProjectionGeometry g;
  const KeypointLayout layout = KeypointLayout::standard();
  std::vector<double> medians;
  for (double sigma : {0.1, 0.5, 1.0}) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> errs;
    for (int n = 0; n < 10000; ++n) {
      const Pose p = random_pose(rng);
      auto kps = keypoints_from_pose(p, layout, g);
      for (auto& q : kps.points) q += Vec2(noise(rng), noise(rng));
      const PoseRecovery r = pose_from_keypoints(kps, layout, g);
      errs.push_back(std::hypot(r.pose.x - p.x, r.pose.y - p.y));
    }
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    medians.push_back(errs[errs.size() / 2]);
  }
  EXPECT_LT(medians[0], medians[1]);
  EXPECT_LT(medians[1], medians[2]);
}
