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

#include "xpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xpose/errors.hpp"

namespace xpose {

double wrap_degrees_360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r -= 360.0;  // fmod of tiny negatives can round up to 360
  return r;
}

double angle_error(double a_deg, double b_deg) {
  double d = std::fmod(a_deg - b_deg, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

Pose make_pose(double x, double y, double alpha_deg, double tau_deg, double depth_mm) {
  require(std::isfinite(x) && std::isfinite(y) && std::isfinite(alpha_deg) && std::isfinite(tau_deg) &&
              std::isfinite(depth_mm),
          ErrorCode::InvalidArgument, "pose components must be finite");
  require(depth_mm > 0.0, ErrorCode::InvalidArgument, "pose depth must be positive");
  require(tau_deg >= -90.0 && tau_deg <= 90.0, ErrorCode::InvalidArgument, "projection angle outside [-90, 90]");
  return Pose{x, y, wrap_degrees_360(alpha_deg), tau_deg, depth_mm};
}

void ProjectionGeometry::validate() const {
  require(source_detector_distance > 0.0, ErrorCode::InvalidArgument, "source_detector_distance must be > 0");
  require(pixel_spacing > 0.0, ErrorCode::InvalidArgument, "pixel_spacing must be > 0");
  require(width > 0 && height > 0, ErrorCode::InvalidArgument, "detector size must be positive");
}

KeypointLayout KeypointLayout::standard(bool mirrored) {
  const double s = mirrored ? -1.0 : 1.0;
  KeypointLayout l;
  l.points = {Vec2{-3.0 * s, 0.0}, Vec2{-1.0 * s, 0.0}, Vec2{1.0 * s, 0.0},
              Vec2{3.0 * s, 0.0},  Vec2{0.0, -2.0},     Vec2{0.0, 2.0}};
  l.axis_indices = {0, 1, 2, 3};
  l.perp_indices = {4, 5};
  return l;
}

void KeypointLayout::validate() const {
  std::array<int, 6> seen{};
  for (int i : axis_indices) {
    require(i >= 0 && i < 6, ErrorCode::InvalidArgument, "axis index out of range");
    require(points[i].y() == 0.0, ErrorCode::InvalidArgument, "axis keypoints need y_key = 0");
    ++seen[i];
  }
  for (int i : perp_indices) {
    require(i >= 0 && i < 6, ErrorCode::InvalidArgument, "perp index out of range");
    require(points[i].x() == 0.0, ErrorCode::InvalidArgument, "perpendicular keypoints need x_key = 0");
    ++seen[i];
  }
  for (int c : seen) require(c == 1, ErrorCode::InvalidArgument, "axis/perp indices must partition the 6 keypoints");
  require(axis_indices.size() >= 2 && perp_indices.size() >= 2, ErrorCode::InvalidArgument,
          "need at least two axis and two perpendicular keypoints");
  auto [amin, amax] = std::minmax_element(axis_indices.begin(), axis_indices.end(),
                                          [&](int a, int b) { return points[a].x() < points[b].x(); });
  require(points[*amin].x() != points[*amax].x(), ErrorCode::InvalidArgument, "axis keypoints need distinct x_key");
  auto [pmin, pmax] = std::minmax_element(perp_indices.begin(), perp_indices.end(),
                                          [&](int a, int b) { return points[a].y() < points[b].y(); });
  require(points[*pmin].y() != points[*pmax].y(), ErrorCode::InvalidArgument, "perp keypoints need distinct y_key");
}

KeypointSet keypoints_from_pose(const Pose& pose, const KeypointLayout& layout, const ProjectionGeometry& geom) {
  require(std::abs(pose.tau) < 90.0, ErrorCode::OutOfRange, "|tau| >= 90 degenerates the axis projection");
  require(pose.depth > 0.0, ErrorCode::InvalidArgument, "pose depth must be positive");
  const double scale = 1.0 / (geom.d2p() * pose.depth);
  const double ca = std::cos(deg2rad(pose.alpha));
  const double sa = std::sin(deg2rad(pose.alpha));
  const double ct = std::cos(deg2rad(pose.tau));
  KeypointSet out;
  for (std::size_t i = 0; i < 6; ++i) {
    const double u = layout.points[i].x() * ct;
    const double v = layout.points[i].y();
    out.points[i] = Vec2{pose.x + scale * (ca * u - sa * v), pose.y + scale * (sa * u + ca * v)};
  }
  return out;
}

Line2 fit_line(std::span<const Vec2> points) {
  require(points.size() >= 2, ErrorCode::Degenerate, "fit_line needs at least two points");
  Vec2 c = Vec2::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const Vec2 q = p - c;
    sxx += q.x() * q.x();
    syy += q.y() * q.y();
    sxy += q.x() * q.y();
  }
  require(sxx + syy > 0.0, ErrorCode::Degenerate, "fit_line: all points coincide");
  // Principal axis of the 2x2 scatter matrix.
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 dir{std::cos(theta), std::sin(theta)};
  if (dir.dot(points.back() - points.front()) < 0.0) dir = -dir;
  return {c, dir};
}

namespace {

std::vector<int> sorted_by(const KeypointLayout& layout, const std::vector<int>& idx, int coord) {
  std::vector<int> out = idx;
  std::stable_sort(out.begin(), out.end(),
                   [&](int a, int b) { return layout.points[a][coord] < layout.points[b][coord]; });
  return out;
}

}  // namespace

PoseRecovery pose_from_keypoints(const KeypointSet& kps, const KeypointLayout& layout,
                                 const ProjectionGeometry& geom) {
  for (const auto& p : kps.points)
    require(p.allFinite(), ErrorCode::InvalidArgument, "keypoints must be finite");

  const auto axis = sorted_by(layout, layout.axis_indices, 0);
  const auto perp = sorted_by(layout, layout.perp_indices, 1);

  std::vector<Vec2> axis_pts, perp_pts;
  for (int i : axis) axis_pts.push_back(kps.points[i]);
  for (int i : perp) perp_pts.push_back(kps.points[i]);
  const Line2 la = fit_line(axis_pts);
  const Line2 lp = fit_line(perp_pts);

  const double cross = la.direction.x() * lp.direction.y() - la.direction.y() * lp.direction.x();
  require(std::abs(cross) > 1e-12, ErrorCode::Degenerate, "axis and perpendicular keypoint lines are parallel");
  const Vec2 r = lp.point - la.point;
  const double s = (r.x() * lp.direction.y() - r.y() * lp.direction.x()) / cross;
  const Vec2 position = la.point + s * la.direction;

  const double alpha = wrap_degrees_360(rad2deg(std::atan2(la.direction.y(), la.direction.x())));

  const int p_lo = perp.front(), p_hi = perp.back();
  const double perp_len = (kps.points[p_hi] - kps.points[p_lo]).norm();
  require(perp_len > 0.0, ErrorCode::Degenerate, "perpendicular keypoints coincide");
  const double c = geom.d2p();
  const double depth = std::abs(layout.points[p_hi].y() - layout.points[p_lo].y()) / (c * perp_len);

  const int a_lo = axis.front(), a_hi = axis.back();
  const double axis_len = (kps.points[a_hi] - kps.points[a_lo]).norm();
  const double cos_tau = c * depth * axis_len / std::abs(layout.points[a_hi].x() - layout.points[a_lo].x());

  PoseRecovery out;
  out.cos_tau_raw = cos_tau;
  double ct = cos_tau;
  if (ct > 1.0) {
    if (ct <= 1.0 + kCosTauClampTolerance)
      out.cos_tau_clamped = true;
    else
      out.cos_tau_out_of_range = true;
    ct = 1.0;
  }
  const double tau = rad2deg(std::acos(std::max(0.0, ct)));
  out.pose = Pose{position.x(), position.y(), alpha, tau, depth};
  return out;
}

}  // namespace xpose
