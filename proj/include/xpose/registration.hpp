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

// Intensity-based 2D/3D registration baseline: the instrument is moved in the
// plane parallel to the detector (position at fixed depth, rotation about the
// projection normal), re-rendered, and scored against the fixed radiograph on
// the patch region of the initial estimate.

#include <cstdint>
#include <string>
#include <vector>

#include "xpose/cmaes.hpp"
#include "xpose/geometry.hpp"
#include "xpose/mesh.hpp"
#include "xpose/patch.hpp"
#include "xpose/renderer.hpp"
#include "xpose/sampler.hpp"

namespace xpose {

enum class SimilarityMetric { GradientCorrelation, MutualInformation };

std::string to_string(SimilarityMetric m);
SimilarityMetric similarity_metric_from_string(const std::string& s);

struct RegistrationConfig {
  SimilarityMetric metric = SimilarityMetric::GradientCorrelation;
  int max_renders = 400;
  int lambda = 0;              // 0: CMA-ES default for the search dimension
  double sigma0 = 1.0;         // in normalized search units
  double position_scale_mm = 1.0;  // one search unit in mm (image plane at the instrument depth)
  double angle_scale_deg = 10.0;   // one search unit in degrees
  int mi_bins = 32;
  int upsample = 0;            // insert upsampling for moving renders; 0: record setting
  std::uint64_t seed = 1;

  void validate() const;
};

/// Known scene of one radiograph: anatomy, instrument and projection. The
/// out-of-plane degrees of freedom (depth, projection angle, roll) come from
/// `record` and stay fixed during the search.
struct RegistrationScene {
  const Volume* anatomy = nullptr;
  DatasetRecord record;
};

/// Instrument placement whose projection has the in-plane pose (x, y, alpha)
/// and the record's depth, projection angle and roll.
std::pair<Vec3, Mat3> placement_for_pose(const DatasetRecord& record, double x, double y, double alpha_deg);

struct RegistrationResult {
  Pose pose;
  double best_score = 0.0;  // similarity (higher is better)
  double initial_score = 0.0;
  int renders = 0;
  bool budget_exhausted = false;
  std::vector<double> history;  // best similarity after each generation
};

RegistrationResult register_pose(const Radiograph& fixed, const Pose& initial, const RegistrationScene& scene,
                                 const RegistrationConfig& cfg);

}  // namespace xpose
