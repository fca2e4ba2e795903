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

#include "xpose/registration.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "xpose/errors.hpp"
#include "xpose/similarity.hpp"

namespace xpose {

std::string to_string(SimilarityMetric m) { return m == SimilarityMetric::GradientCorrelation ? "gc" : "mi"; }

SimilarityMetric similarity_metric_from_string(const std::string& s) {
  if (s == "gc" || s == "gradient-correlation") return SimilarityMetric::GradientCorrelation;
  if (s == "mi" || s == "mutual-information") return SimilarityMetric::MutualInformation;
  fail(ErrorCode::InvalidArgument, "unknown similarity metric '" + s + "'");
}

void RegistrationConfig::validate() const {
  require(sigma0 > 0.0, ErrorCode::InvalidArgument, "registration sigma0 must be positive");
  require(position_scale_mm > 0.0 && angle_scale_deg > 0.0, ErrorCode::InvalidArgument,
          "registration search scales must be positive");
  const int lam = lambda > 0 ? lambda : cmaes_default_lambda(3);
  require(max_renders >= lam + 1, ErrorCode::InvalidArgument, "max_renders must cover one CMA-ES generation");
  require(mi_bins >= 2, ErrorCode::InvalidArgument, "mi_bins must be >= 2");
  require(upsample == 0 || upsample == 1 || upsample == 2 || upsample == 4, ErrorCode::InvalidArgument,
          "upsample must be 0, 1, 2 or 4");
}

std::pair<Vec3, Mat3> placement_for_pose(const DatasetRecord& record, double x, double y, double alpha_deg) {
  const ProjectionSetup& s = record.setup;
  const Mat3 rc = s.camera_from_world();
  const Vec3 pc = s.to_camera(record.position);
  const double d = pc.z();
  const Vec2 c = s.geom.center();
  const double k = s.geom.pixel_spacing * d / s.geom.source_detector_distance;
  const Vec3 pc_new((x - c.x()) * k, (y - c.y()) * k, d);
  const Vec3 position = s.object_center + rc.transpose() * (pc_new - s.object_in_camera());
  const Mat3 spin = Eigen::AngleAxisd(deg2rad(angle_error(alpha_deg, record.pose.alpha)), Vec3::UnitZ())
                        .toRotationMatrix();
  const Mat3 rotation = rc.transpose() * spin * rc * record.rotation;
  return {position, rotation};
}

RegistrationResult register_pose(const Radiograph& fixed, const Pose& initial, const RegistrationScene& scene,
                                 const RegistrationConfig& cfg) {
  cfg.validate();
  require(scene.anatomy != nullptr, ErrorCode::InvalidArgument, "registration needs the anatomy volume");
  const DatasetRecord& rec = scene.record;
  const ProjectionSetup& setup = fixed.setup;
  require(fixed.image.width == setup.geom.width && fixed.image.height == setup.geom.height,
          ErrorCode::InvalidArgument, "fixed radiograph must cover the full detector");

  // Fixed region: the patch raster of the initial estimate.
  Pose start = initial;
  require(start.x >= 0.0 && start.y >= 0.0 && start.x <= setup.geom.width - 1 && start.y <= setup.geom.height - 1,
          ErrorCode::OutOfRange, "initial estimate lies outside the image");
  const CropTransform crop{Vec2(start.x, start.y), start.alpha, patch_anchor(layout_mirrored(rec.instrument))};
  const std::vector<double> fixed_patch = sample_patch_raw(fixed.image, crop);

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Vec2& corner : {Vec2(0, 0), Vec2(kPatchWidth - 1, 0), Vec2(0, kPatchHeight - 1),
                             Vec2(kPatchWidth - 1, kPatchHeight - 1)}) {
    const Vec2 q = crop.to_image(corner);
    xmin = std::min(xmin, q.x());
    xmax = std::max(xmax, q.x());
    ymin = std::min(ymin, q.y());
    ymax = std::max(ymax, q.y());
  }
  PixelWindow win;
  win.x0 = std::max(0, static_cast<int>(std::floor(xmin)) - 1);
  win.y0 = std::max(0, static_cast<int>(std::floor(ymin)) - 1);
  const int x1 = std::min(setup.geom.width - 1, static_cast<int>(std::ceil(xmax)) + 1);
  const int y1 = std::min(setup.geom.height - 1, static_cast<int>(std::ceil(ymax)) + 1);
  win.width = std::max(0, x1 - win.x0 + 1);
  win.height = std::max(0, y1 - win.y0 + 1);

  Scene anatomy_only;
  anatomy_only.anatomy = scene.anatomy;
  const Image2D anatomy_window = render_scene_window(anatomy_only, setup, win);

  const InstrumentMesh mesh = make_instrument(rec.instrument, rec.instrument_params);
  const int factor = cfg.upsample > 0 ? cfg.upsample : rec.upsample;
  const double px_per_mm = 1.0 / (setup.geom.d2p() * rec.pose.depth);

  auto pose_of = [&](const Eigen::VectorXd& z) {
    Pose p = start;
    p.x = start.x + z[0] * cfg.position_scale_mm * px_per_mm;
    p.y = start.y + z[1] * cfg.position_scale_mm * px_per_mm;
    p.alpha = wrap_degrees_360(start.alpha + z[2] * cfg.angle_scale_deg);
    p.tau = rec.pose.tau;
    p.depth = rec.pose.depth;
    return p;
  };

  int renders = 0;
  double first_score = 0.0;
  auto similarity = [&](const Eigen::VectorXd& z) {
    require(renders < cfg.max_renders, ErrorCode::InvalidArgument, "render budget exceeded");
    ++renders;
    const Pose p = pose_of(z);
    const auto [position, rotation] = placement_for_pose(rec, p.x, p.y, p.alpha);
    const InstrumentMesh placed = transform_mesh(mesh, position, rotation);
    const Volume insert = make_instrument_insert(*scene.anatomy, placed, rec.mu_instrument, factor, kInsertMarginMm);
    Scene sc;
    sc.anatomy = scene.anatomy;
    sc.insert = &insert;
    Image2D moving = anatomy_window;
    add_insert_correction(sc, setup, moving);
    const std::vector<double> moving_patch = sample_patch_raw(moving, crop);
    const double score = cfg.metric == SimilarityMetric::GradientCorrelation
                             ? gradient_correlation(fixed_patch, moving_patch, kPatchWidth, kPatchHeight)
                             : mutual_information(fixed_patch, moving_patch, cfg.mi_bins);
    if (renders == 1) first_score = score;
    return score;
  };

  CmaesConfig cc;
  cc.sigma0 = cfg.sigma0;
  cc.lambda = cfg.lambda;
  cc.max_evaluations = cfg.max_renders;
  cc.evaluate_initial = true;
  cc.seed = cfg.seed;
  const CmaesResult opt = cma_es_minimize([&](const Eigen::VectorXd& z) { return -similarity(z); },
                                          Eigen::VectorXd::Zero(3), cc);

  RegistrationResult out;
  out.pose = pose_of(opt.best);
  out.best_score = -opt.best_value;
  out.renders = renders;
  out.budget_exhausted = opt.budget_exhausted;
  for (double h : opt.history) out.history.push_back(-h);
  out.initial_score = first_score;
  return out;
}

}  // namespace xpose
